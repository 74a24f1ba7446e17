from dataclasses import dataclass
from functools import cached_property
from typing import Dict, FrozenSet, List, Optional, Tuple

import networkx as nx
from geopy.distance import great_circle

EARTH_RADIUS_KM = 6371.0
DEFAULT_PROPAGATION_SPEED = 2e8  # m/s, optical fibre


class TopologyError(ValueError):
    """Invalid topology content, reported with its location in the source file"""

    def __init__(self, message: str, location: Optional[str] = None):
        self.location = location
        if location:
            message = f"{location}: {message}"
        super().__init__(message)


class UnknownSiteError(TopologyError, KeyError):
    """A site id that does not belong to the topology"""

    def __init__(self, site_id: str):
        self.site_id = site_id
        super().__init__(f"unknown site id '{site_id}'")

    def __str__(self):
        return self.args[0]


@dataclass(frozen=True)
class Site:
    """A candidate data-center site (a WAN point of presence)"""
    id: str
    latitude: Optional[float] = None
    longitude: Optional[float] = None
    gateway: bool = False

    @property
    def has_coordinates(self) -> bool:
        return self.latitude is not None and self.longitude is not None


@dataclass(frozen=True)
class Link:
    """Undirected link; capacity applies to each direction"""
    a: str
    b: str
    capacity_mbps: float
    latency_ms: float

    @property
    def endpoints(self) -> FrozenSet[str]:
        return frozenset((self.a, self.b))


@dataclass(frozen=True)
class Topology:
    """
    Immutable WAN topology.

    Sites keep the order of the source file; that order defines the
    i < j convention used by the placement model.
    """
    name: str
    sites: Tuple[Site, ...]
    links: Tuple[Link, ...]
    propagation_speed: float = DEFAULT_PROPAGATION_SPEED

    @cached_property
    def _sites_by_id(self) -> Dict[str, Site]:
        return {site.id: site for site in self.sites}

    @cached_property
    def _links_by_pair(self) -> Dict[FrozenSet[str], Link]:
        return {link.endpoints: link for link in self.links}

    @cached_property
    def _adjacency(self) -> Dict[str, FrozenSet[str]]:
        adjacency: Dict[str, set] = {site.id: set() for site in self.sites}
        for link in self.links:
            adjacency[link.a].add(link.b)
            adjacency[link.b].add(link.a)
        return {site_id: frozenset(peers) for site_id, peers in adjacency.items()}

    @cached_property
    def site_ids(self) -> Tuple[str, ...]:
        return tuple(site.id for site in self.sites)

    @cached_property
    def gateways(self) -> Tuple[str, ...]:
        return tuple(site.id for site in self.sites if site.gateway)

    def site(self, site_id: str) -> Site:
        try:
            return self._sites_by_id[site_id]
        except KeyError:
            raise UnknownSiteError(site_id) from None

    def link(self, a: str, b: str) -> Optional[Link]:
        return self._links_by_pair.get(frozenset((a, b)))

    def adjacent(self, a: str, b: str) -> bool:
        return a != b and frozenset((a, b)) in self._links_by_pair

    def capacity(self, i: str, j: str) -> float:
        """W_ij in Mbps; zero when the sites share no link"""
        link = self.link(i, j)
        return link.capacity_mbps if link is not None and i != j else 0.0

    def latency(self, i: str, j: str) -> float:
        """Delta_ij in ms; only defined for linked sites"""
        link = self.link(i, j)
        if link is None or i == j:
            raise TopologyError(f"no link between '{i}' and '{j}'")
        return link.latency_ms

    def neighbors(self, site_id: str) -> FrozenSet[str]:
        """Sites sharing a link with site_id"""
        if site_id not in self._adjacency:
            raise UnknownSiteError(site_id)
        return self._adjacency[site_id]

    @cached_property
    def _directed_pairs(self) -> Tuple[Tuple[str, str], ...]:
        return tuple(
            (i, j)
            for i in self.site_ids
            for j in self.site_ids
            if self.adjacent(i, j)
        )

    def directed_pairs(self) -> List[Tuple[str, str]]:
        """Ordered adjacent pairs (i, j), in site order"""
        return list(self._directed_pairs)

    def graph(self) -> nx.Graph:
        """Fresh undirected graph weighted by latency"""
        graph = nx.Graph(name=self.name)
        for site in self.sites:
            graph.add_node(site.id, gateway=site.gateway)
        for link in self.links:
            graph.add_edge(
                link.a, link.b,
                latency_ms=link.latency_ms,
                capacity_mbps=link.capacity_mbps,
            )
        return graph


def derive_latency(site_a: Site, site_b: Site, speed: float = DEFAULT_PROPAGATION_SPEED) -> float:
    """Propagation delay in ms over the great-circle distance between two sites"""
    if speed <= 0:
        raise ValueError("propagation speed must be positive")
    distance_km = great_circle(
        (site_a.latitude, site_a.longitude),
        (site_b.latitude, site_b.longitude),
        radius=EARTH_RADIUS_KM,
    ).km
    return distance_km * 1000.0 / speed * 1000.0


def neighbors(topology: Topology, site: str) -> FrozenSet[str]:
    """N(site): the sites adjacent to site"""
    return topology.neighbors(site)
