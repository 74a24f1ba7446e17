import random
from pathlib import Path

import numpy as np
import pytest

from failure.independence import build_independence_matrix
from placement.model import PlacementInstance, PlacementModelBuilder, PlacementParams
from routing.secondary_paths import compute_secondary_paths
from topology.loader import TopologyLoader, load_topology

DATA_DIR = Path(__file__).resolve().parent.parent / "data" / "topologies"


def bundled(name: str):
    return load_topology(DATA_DIR / f"{name}.json")


def make_instance(topology, alpha, lworst_ms=1.3, gamma=0, bandwidth_mbps=240.0, umax=None, matrix=None):
    params = PlacementParams(alpha=alpha, lworst_ms=lworst_ms, bandwidth_mbps=bandwidth_mbps,
                             umax=umax, use_secondary_paths=gamma)
    if matrix is None:
        matrix = build_independence_matrix(topology)
    return PlacementInstance(topology, matrix, compute_secondary_paths(topology), params)


def make_model(topology, alpha, **kwargs):
    return PlacementModelBuilder(make_instance(topology, alpha, **kwargs)).build()


def all_dependent(topology):
    """Independence matrix with every pair forced to 1"""
    matrix = build_independence_matrix(topology)
    return matrix.with_entries(np.ones_like(matrix.entries))


def random_topology_dict(rng: random.Random, min_sites: int = 2, max_sites: int = 8, name: str = "random"):
    """Connected random topology: a random spanning tree plus a few chords"""
    count = rng.randint(min_sites, max_sites)
    ids = [f"s{idx}" for idx in range(count)]
    gateways = set(rng.sample(ids, rng.randint(1, max(1, count // 2))))
    edges = set()
    for idx in range(1, count):
        edges.add(tuple(sorted((ids[idx], ids[rng.randrange(idx)]))))
    for _ in range(rng.randint(0, count)):
        a, b = rng.sample(ids, 2)
        edges.add(tuple(sorted((a, b))))
    return {
        "name": name,
        "sites": [{"id": site, "gateway": site in gateways} for site in ids],
        "links": [
            {
                "a": a,
                "b": b,
                "capacity_mbps": rng.choice([2400, 4800, 10000]),
                "latency_ms": round(rng.uniform(0.2, 2.0), 1),
            }
            for a, b in sorted(edges)
        ],
    }


def random_topology(rng: random.Random, **kwargs):
    return TopologyLoader().from_dict(random_topology_dict(rng, **kwargs))


@pytest.fixture
def triangle():
    return bundled("triangle")


@pytest.fixture
def two_site():
    return bundled("two_site")


@pytest.fixture
def chain():
    return bundled("chain")


@pytest.fixture
def ring4():
    return bundled("ring4")


@pytest.fixture
def figure1():
    return bundled("figure1")


@pytest.fixture
def bowtie():
    return bundled("bowtie")


@pytest.fixture
def rnp_sample():
    return bundled("rnp_sample")
