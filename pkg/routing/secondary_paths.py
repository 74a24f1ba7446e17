import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterator, List, Optional, Tuple

import networkx as nx

from topology.network import Topology

logger = logging.getLogger(__name__)

# latencies closer than this are treated as ties
LATENCY_TIE_MS = 1e-9

Pair = Tuple[str, str]


@dataclass(frozen=True)
class SecondaryPath:
    """Alternate route from k to m that avoids the direct replication link"""
    source: str
    target: str
    hops: Tuple[str, ...]
    latency_ms: float

    def __post_init__(self):
        if len(self.hops) < 2:
            raise ValueError("a secondary path needs at least two hops")
        if self.hops[0] != self.source or self.hops[-1] != self.target:
            raise ValueError(f"path {self.hops} does not run from {self.source} to {self.target}")
        if len(set(self.hops)) != len(self.hops):
            raise ValueError(f"path {self.hops} repeats a site")
        if len(self.hops) == 2:
            raise ValueError("a secondary path cannot use the direct link")

    def edges(self) -> List[Pair]:
        """Directed links traversed from source to target"""
        return list(zip(self.hops, self.hops[1:]))


@dataclass(frozen=True)
class SecondaryPathSet:
    """Secondary path (or None when the link is a bridge) for every ordered adjacent pair"""
    paths: Dict[Pair, Optional[SecondaryPath]] = field(default_factory=dict)

    @cached_property
    def _pairs_through(self) -> Dict[Pair, Tuple[Pair, ...]]:
        through: Dict[Pair, List[Pair]] = {}
        for pair, path in self.paths.items():
            if path is None:
                continue
            for edge in path.edges():
                through.setdefault(edge, []).append(pair)
        return {edge: tuple(pairs) for edge, pairs in through.items()}

    def get(self, k: str, m: str) -> Optional[SecondaryPath]:
        return self.paths.get((k, m))

    def absent(self, k: str, m: str) -> bool:
        return (k, m) in self.paths and self.paths[(k, m)] is None

    def uses(self, k: str, m: str, i: str, j: str) -> int:
        """s^km_ij: 1 when directed link (i, j) lies on the k -> m secondary path"""
        return int((k, m) in self._pairs_through.get((i, j), ()))

    def pairs_through(self, i: str, j: str) -> Tuple[Pair, ...]:
        """Every (k, m) whose secondary path traverses directed link (i, j)"""
        return self._pairs_through.get((i, j), ())

    def __iter__(self) -> Iterator[Tuple[Pair, Optional[SecondaryPath]]]:
        return iter(self.paths.items())

    def to_lines(self) -> List[str]:
        lines = []
        for (k, m), path in self.paths.items():
            if path is None:
                lines.append(f"{k},{m},ABSENT")
            else:
                lines.append(f"{k},{m},{':'.join(path.hops)},{path.latency_ms:.4f}")
        return lines


def path_latency(path: SecondaryPath, topology: Topology) -> float:
    """Sum of link latencies along path"""
    return sum(topology.latency(i, j) for i, j in path.edges())


def _shortest_detour(graph: nx.Graph, k: str, m: str) -> Optional[Tuple[str, ...]]:
    """
    Minimum-latency k -> m path once link (k, m) is removed. Among
    equal-latency paths prefer fewer hops, then the lexicographically
    smallest site sequence.
    """
    detour_graph = graph.copy()
    detour_graph.remove_edge(k, m)

    best_latency = None
    candidates = []
    try:
        for hops in nx.shortest_simple_paths(detour_graph, k, m, weight="latency_ms"):
            latency = nx.path_weight(detour_graph, hops, weight="latency_ms")
            if best_latency is None:
                best_latency = latency
            elif latency > best_latency + LATENCY_TIE_MS:
                break
            candidates.append(tuple(hops))
    except nx.NetworkXNoPath:
        return None
    return min(candidates, key=lambda hops: (len(hops), hops)) if candidates else None


def compute_secondary_paths(topology: Topology) -> SecondaryPathSet:
    """Step one of the placement: the detour for every replication link, chosen on latency alone"""
    graph = topology.graph()
    paths: Dict[Pair, Optional[SecondaryPath]] = {}
    for k, m in topology.directed_pairs():
        hops = _shortest_detour(graph, k, m)
        if hops is None:
            logger.debug(f"Link {k}-{m} is a bridge; no secondary path")
            paths[(k, m)] = None
            continue
        paths[(k, m)] = SecondaryPath(
            source=k,
            target=m,
            hops=hops,
            latency_ms=sum(topology.latency(i, j) for i, j in zip(hops, hops[1:])),
        )

    absent = sum(1 for path in paths.values() if path is None)
    logger.info(f"Computed secondary paths for {len(paths)} ordered pair(s), {absent} absent")
    return SecondaryPathSet(paths=paths)
