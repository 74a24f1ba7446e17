import csv
import io
import logging
from dataclasses import dataclass
from typing import FrozenSet, List, Tuple

import networkx as nx
import numpy as np

from topology.network import Topology, TopologyError, UnknownSiteError

logger = logging.getLogger(__name__)

SITE_FAILURE = "site"
LINK_FAILURE = "link"


@dataclass(frozen=True)
class FailureEvent:
    """A single site or link failure; link targets are unordered pairs"""
    kind: str
    target: Tuple[str, ...]

    @classmethod
    def site(cls, site_id: str) -> "FailureEvent":
        return cls(SITE_FAILURE, (site_id,))

    @classmethod
    def link(cls, a: str, b: str) -> "FailureEvent":
        return cls(LINK_FAILURE, tuple(sorted((a, b))))

    def __str__(self):
        return f"{self.kind}:{'-'.join(self.target)}"


@dataclass(frozen=True, eq=False)
class FailureIndependenceMatrix:
    """I_ij = 1 when sites i and j can become unreachable under the same single failure"""
    order: Tuple[str, ...]
    entries: np.ndarray

    def index(self, site_id: str) -> int:
        try:
            return self.order.index(site_id)
        except ValueError:
            raise UnknownSiteError(site_id) from None

    def value(self, i: str, j: str) -> int:
        return int(self.entries[self.index(i), self.index(j)])

    def dependent(self, i: str, j: str) -> bool:
        return self.value(i, j) == 1

    def with_entries(self, entries: np.ndarray) -> "FailureIndependenceMatrix":
        return FailureIndependenceMatrix(order=self.order, entries=np.asarray(entries, dtype=np.int8))

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["site", *self.order])
        for idx, site_id in enumerate(self.order):
            writer.writerow([site_id, *(int(v) for v in self.entries[idx])])
        return buffer.getvalue()

    def __eq__(self, other):
        if not isinstance(other, FailureIndependenceMatrix):
            return NotImplemented
        return self.order == other.order and np.array_equal(self.entries, other.entries)


def enumerate_failure_events(topology: Topology) -> List[FailureEvent]:
    """Every single-failure event: each site, then each link"""
    events = [FailureEvent.site(site_id) for site_id in topology.site_ids]
    events.extend(FailureEvent.link(link.a, link.b) for link in topology.links)
    return events


def unreachable_sites(topology: Topology, event: FailureEvent) -> FrozenSet[str]:
    """
    Sites cut off by a failure: the failed site itself plus every surviving
    site without a path to a surviving gateway.
    """
    graph = topology.graph()
    if event.kind == SITE_FAILURE:
        (failed,) = event.target
        topology.site(failed)
        graph.remove_node(failed)
    elif event.kind == LINK_FAILURE:
        a, b = event.target
        if not topology.adjacent(a, b):
            raise TopologyError(f"no link between '{a}' and '{b}'")
        # both directions go down together
        graph.remove_edge(a, b)
    else:
        raise ValueError(f"unknown failure kind '{event.kind}'")

    reachable = set()
    for gateway in topology.gateways:
        if gateway in graph and gateway not in reachable:
            reachable |= nx.node_connected_component(graph, gateway)
    return frozenset(site_id for site_id in topology.site_ids if site_id not in reachable)


def build_independence_matrix(topology: Topology) -> FailureIndependenceMatrix:
    """I_ij = 1 on the diagonal and wherever one failure cuts both i and j off every gateway"""
    order = topology.site_ids
    position = {site_id: idx for idx, site_id in enumerate(order)}
    entries = np.eye(len(order), dtype=np.int8)

    for event in enumerate_failure_events(topology):
        stranded = sorted(position[site_id] for site_id in unreachable_sites(topology, event))
        logger.debug(f"{event} strands {len(stranded)} site(s)")
        if len(stranded) > 1:
            entries[np.ix_(stranded, stranded)] = 1

    logger.info(f"Independence matrix for '{topology.name}': "
                f"{int(entries.sum() - len(order)) // 2} dependent pair(s)")
    return FailureIndependenceMatrix(order=order, entries=entries)
