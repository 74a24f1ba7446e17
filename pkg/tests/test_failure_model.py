import random
from collections import deque

import numpy as np
import pytest

from failure.independence import (
    FailureEvent,
    build_independence_matrix,
    enumerate_failure_events,
    unreachable_sites,
)
from tests.conftest import random_topology_dict
from topology.loader import TopologyLoader
from topology.network import TopologyError, UnknownSiteError


def _reference_matrix(raw):
    """Exhaustive single-failure enumeration with a plain BFS"""
    ids = [site["id"] for site in raw["sites"]]
    gateways = {site["id"] for site in raw["sites"] if site.get("gateway")}
    edges = [(link["a"], link["b"]) for link in raw["links"]]

    def stranded(dead_site=None, dead_edge=None):
        adjacency = {site: set() for site in ids if site != dead_site}
        for a, b in edges:
            if dead_site in (a, b) or {a, b} == dead_edge:
                continue
            adjacency[a].add(b)
            adjacency[b].add(a)
        seen = set()
        queue = deque(g for g in gateways if g != dead_site)
        seen.update(queue)
        while queue:
            node = queue.popleft()
            for peer in adjacency[node]:
                if peer not in seen:
                    seen.add(peer)
                    queue.append(peer)
        return {site for site in ids if site not in seen}

    size = len(ids)
    matrix = np.eye(size, dtype=int)
    scenarios = [stranded(dead_site=site) for site in ids]
    scenarios += [stranded(dead_edge={a, b}) for a, b in edges]
    for lost in scenarios:
        for i in lost:
            for j in lost:
                matrix[ids.index(i), ids.index(j)] = 1
    return matrix


def test_triangle_of_gateways_is_identity(triangle):
    matrix = build_independence_matrix(triangle)
    assert np.array_equal(matrix.entries, np.eye(3))
    assert matrix.to_csv() == "site,A,B,C\nA,1,0,0\nB,0,1,0\nC,0,0,1\n"


def test_chain_behind_single_gateway_is_fully_dependent(chain):
    matrix = build_independence_matrix(chain)
    assert np.array_equal(matrix.entries, np.ones((3, 3)))


def test_two_gateways_are_independent(two_site):
    matrix = build_independence_matrix(two_site)
    assert not matrix.dependent("A", "B")


def test_bowtie_groups_the_far_side_of_the_bridge(bowtie):
    matrix = build_independence_matrix(bowtie)
    far_side = ["R", "S", "T", "U"]
    for i in far_side:
        for j in far_side:
            assert matrix.dependent(i, j)
    assert not matrix.dependent("P", "Q")
    assert not matrix.dependent("P", "R")
    assert not matrix.dependent("Q", "U")


def test_unreachable_site_depends_on_every_site():
    topology = TopologyLoader().from_dict({
        "name": "island",
        "sites": [{"id": "G", "gateway": True}, {"id": "X"}, {"id": "Y"}],
        "links": [{"a": "G", "b": "Y", "capacity_mbps": 100, "latency_ms": 1}],
    })
    matrix = build_independence_matrix(topology)
    # X is stranded by every event, so it shares a failure with everyone
    assert matrix.dependent("X", "G")
    assert matrix.dependent("X", "Y")
    assert matrix.dependent("G", "Y")


def test_link_failure_strands_the_far_end(chain):
    assert unreachable_sites(chain, FailureEvent.link("A", "B")) == frozenset({"B"})
    assert unreachable_sites(chain, FailureEvent.link("G", "A")) == frozenset({"A", "B"})


def test_site_failure_counts_the_failed_site(triangle):
    assert unreachable_sites(triangle, FailureEvent.site("A")) == frozenset({"A"})


def test_failing_the_middle_of_a_chain_strands_the_tail(chain):
    assert unreachable_sites(chain, FailureEvent.site("A")) == frozenset({"A", "B"})


def test_link_failure_between_gateways_strands_nothing(triangle):
    assert unreachable_sites(triangle, FailureEvent.link("A", "B")) == frozenset()


def test_ring_behind_single_gateway_is_fully_dependent(ring4):
    # losing the only gateway strands every site
    assert np.array_equal(build_independence_matrix(ring4).entries, np.ones((4, 4)))


def test_unknown_failure_targets_are_rejected(triangle, chain):
    with pytest.raises(UnknownSiteError):
        unreachable_sites(triangle, FailureEvent.site("Z"))
    with pytest.raises(TopologyError):
        unreachable_sites(chain, FailureEvent.link("G", "B"))


def test_events_cover_every_site_and_link(bowtie):
    events = enumerate_failure_events(bowtie)
    assert len(events) == len(bowtie.sites) + len(bowtie.links)
    assert str(events[0]) == "site:P"


def test_unknown_site_lookup(triangle):
    with pytest.raises(UnknownSiteError):
        build_independence_matrix(triangle).value("A", "Z")


@pytest.mark.parametrize("seed", range(20))
def test_matches_exhaustive_enumeration(seed):
    raw = random_topology_dict(random.Random(seed), max_sites=8)
    topology = TopologyLoader().from_dict(raw)
    matrix = build_independence_matrix(topology)

    assert np.array_equal(matrix.entries, _reference_matrix(raw))
    assert np.array_equal(matrix.entries, matrix.entries.T)
    assert np.all(np.diag(matrix.entries) == 1)
