import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from topology.network import (
    DEFAULT_PROPAGATION_SPEED,
    Link,
    Site,
    Topology,
    TopologyError,
    derive_latency,
)


class SiteSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)
    id: str = Field(min_length=1)
    lat: Optional[float] = Field(default=None, ge=-90.0, le=90.0)
    lon: Optional[float] = Field(default=None, ge=-180.0, le=180.0)
    gateway: bool = False


class LinkSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)
    a: str
    b: str
    capacity_mbps: float = Field(gt=0)
    latency_ms: Optional[float] = Field(default=None, ge=0)


class TopologySpec(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)
    name: str
    propagation_speed_m_per_s: float = Field(default=DEFAULT_PROPAGATION_SPEED, gt=0)
    sites: List[SiteSpec]
    links: List[LinkSpec] = Field(default_factory=list)


def _format_location(loc) -> str:
    text = ""
    for part in loc:
        if isinstance(part, int):
            text += f"[{part}]"
        else:
            text += f".{part}" if text else str(part)
    return text


class TopologyLoader:
    """Parses topology JSON files into validated, immutable Topology objects"""

    def __init__(self):
        self.logger = logging.getLogger(__name__)

    def load(self, path: Union[str, Path]) -> Topology:
        """
        Load and validate a topology file.

        Args:
            path (Union[str, Path]): UTF-8 JSON topology file.

        Returns:
            Topology: The validated topology, missing link latencies derived from coordinates.

        Raises:
            TopologyError: Unreadable file, malformed JSON or invalid content, located in the source.
        """
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise TopologyError(f"cannot read topology file: {e.strerror or e}", location=str(path)) from e
        except UnicodeDecodeError as e:
            raise TopologyError(f"topology file is not valid UTF-8 (byte {e.start})", location=str(path)) from e
        topology = self.loads(text, source=str(path))
        self.logger.info(f"Loaded topology '{topology.name}' from {path}: "
                         f"{len(topology.sites)} sites, {len(topology.links)} links")
        return topology

    def loads(self, text: str, source: str = "<string>") -> Topology:
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise TopologyError(f"parse error: {e.msg}",
                                location=f"{source}:{e.lineno}:{e.colno}") from e
        return self.from_dict(raw, source=source)

    def from_dict(self, raw: Dict[str, Any], source: str = "<dict>") -> Topology:
        try:
            spec = TopologySpec.model_validate(raw)
        except ValidationError as e:
            first = e.errors()[0]
            location = _format_location(first["loc"])
            raise TopologyError(first["msg"], location=f"{source}: {location}" if location else source) from e
        return self._build(spec, source)

    def _build(self, spec: TopologySpec, source: str) -> Topology:
        sites: Dict[str, Site] = {}
        for idx, site_spec in enumerate(spec.sites):
            if site_spec.id in sites:
                raise TopologyError(f"duplicate site id '{site_spec.id}'",
                                    location=f"{source}: sites[{idx}].id")
            sites[site_spec.id] = Site(
                id=site_spec.id,
                latitude=site_spec.lat,
                longitude=site_spec.lon,
                gateway=site_spec.gateway,
            )

        if not any(site.gateway for site in sites.values()):
            raise TopologyError("at least one site must be a gateway", location=f"{source}: sites")

        links: List[Link] = []
        seen_pairs = set()
        for idx, link_spec in enumerate(spec.links):
            for end in ("a", "b"):
                site_id = getattr(link_spec, end)
                if site_id not in sites:
                    raise TopologyError(f"unknown link endpoint '{site_id}'",
                                        location=f"{source}: links[{idx}].{end}")
            if link_spec.a == link_spec.b:
                raise TopologyError("link endpoints must differ", location=f"{source}: links[{idx}]")
            pair = frozenset((link_spec.a, link_spec.b))
            if pair in seen_pairs:
                raise TopologyError(f"duplicate link {link_spec.a}-{link_spec.b}",
                                    location=f"{source}: links[{idx}]")
            seen_pairs.add(pair)

            latency_ms = link_spec.latency_ms
            if latency_ms is None:
                site_a, site_b = sites[link_spec.a], sites[link_spec.b]
                for site in (site_a, site_b):
                    if not site.has_coordinates:
                        raise TopologyError(
                            f"latency_ms missing and site '{site.id}' has no coordinates",
                            location=f"{source}: links[{idx}]")
                latency_ms = derive_latency(site_a, site_b, spec.propagation_speed_m_per_s)

            links.append(Link(
                a=link_spec.a,
                b=link_spec.b,
                capacity_mbps=link_spec.capacity_mbps,
                latency_ms=latency_ms,
            ))

        return Topology(
            name=spec.name,
            sites=tuple(sites.values()),
            links=tuple(links),
            propagation_speed=spec.propagation_speed_m_per_s,
        )

    def dump(self, topology: Topology) -> Dict[str, Any]:
        """Serialize with explicit latencies so reloading reproduces the topology"""
        sites = []
        for site in topology.sites:
            entry: Dict[str, Any] = {"id": site.id}
            if site.latitude is not None:
                entry["lat"] = site.latitude
            if site.longitude is not None:
                entry["lon"] = site.longitude
            entry["gateway"] = site.gateway
            sites.append(entry)
        return {
            "name": topology.name,
            "propagation_speed_m_per_s": topology.propagation_speed,
            "sites": sites,
            "links": [
                {
                    "a": link.a,
                    "b": link.b,
                    "capacity_mbps": link.capacity_mbps,
                    "latency_ms": link.latency_ms,
                }
                for link in topology.links
            ],
        }

    def save(self, topology: Topology, path: Union[str, Path]):
        Path(path).write_text(json.dumps(self.dump(topology), indent=2) + "\n", encoding="utf-8")


def load_topology(path: Union[str, Path]) -> Topology:
    """Load a topology file with a default loader"""
    return TopologyLoader().load(path)


def save_topology(topology: Topology, path: Union[str, Path]):
    TopologyLoader().save(topology, path)
