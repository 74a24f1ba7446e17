import json
import math

import pytest

from topology.loader import TopologyLoader, load_topology, save_topology
from topology.network import (
    EARTH_RADIUS_KM,
    Site,
    TopologyError,
    UnknownSiteError,
    derive_latency,
    neighbors,
)
from tests.conftest import DATA_DIR


def _site_at_km(site_id: str, km: float) -> Site:
    return Site(id=site_id, latitude=math.degrees(km / EARTH_RADIUS_KM), longitude=0.0)


def test_latency_over_260_km_is_1_3_ms():
    origin = Site(id="A", latitude=0.0, longitude=0.0)
    assert derive_latency(origin, _site_at_km("B", 260.0)) == pytest.approx(1.3, abs=1e-9)


def test_latency_over_130_km_is_0_65_ms():
    origin = Site(id="A", latitude=0.0, longitude=0.0)
    assert derive_latency(origin, _site_at_km("B", 130.0)) == pytest.approx(0.65, abs=1e-9)


def test_colocated_sites_have_zero_latency():
    site = Site(id="A", latitude=-23.55, longitude=-46.63)
    assert derive_latency(site, site) == 0.0


def test_latency_rejects_non_positive_speed():
    origin = Site(id="A", latitude=0.0, longitude=0.0)
    with pytest.raises(ValueError):
        derive_latency(origin, _site_at_km("B", 10.0), speed=0.0)


def test_triangle_neighbors(triangle):
    assert neighbors(triangle, "A") == frozenset({"B", "C"})
    assert triangle.neighbors("C") == frozenset({"A", "B"})


def test_neighbors_of_unknown_site(triangle):
    with pytest.raises(UnknownSiteError):
        neighbors(triangle, "Z")


def test_isolated_site_has_no_neighbors():
    topology = TopologyLoader().from_dict({
        "name": "lonely",
        "sites": [{"id": "G", "gateway": True}, {"id": "X", "gateway": True}],
        "links": [],
    })
    assert neighbors(topology, "X") == frozenset()


def test_capacity_is_zero_for_non_adjacent_pairs(chain):
    assert chain.capacity("G", "A") == 10000
    assert chain.capacity("G", "B") == 0.0
    with pytest.raises(TopologyError):
        chain.latency("G", "B")


def test_directed_pairs_follow_site_order(chain):
    assert chain.directed_pairs() == [("G", "A"), ("A", "G"), ("A", "B"), ("B", "A")]


def test_explicit_latency_wins_over_coordinates(triangle):
    assert triangle.latency("A", "B") == 1.0


def test_missing_latency_is_derived_from_coordinates(rnp_sample):
    site_a = rnp_sample.site("sao-paulo")
    site_b = rnp_sample.site("rio-de-janeiro")
    assert rnp_sample.latency("sao-paulo", "rio-de-janeiro") == pytest.approx(derive_latency(site_a, site_b))
    assert 1.5 < rnp_sample.latency("sao-paulo", "rio-de-janeiro") < 2.0


def test_gateways_are_listed_in_file_order(rnp_sample):
    assert rnp_sample.gateways == ("sao-paulo", "rio-de-janeiro", "brasilia")


def _load_error(raw) -> TopologyError:
    with pytest.raises(TopologyError) as info:
        TopologyLoader().from_dict(raw)
    return info.value


def test_out_of_range_latitude_reports_its_location():
    error = _load_error({
        "name": "bad",
        "sites": [{"id": "A", "gateway": True}, {"id": "B", "lat": 95.0, "lon": 0.0}],
        "links": [],
    })
    assert error.location.endswith("sites[1].lat")
    assert "sites[1].lat" in str(error)


def test_unknown_link_endpoint_is_rejected():
    error = _load_error({
        "name": "bad",
        "sites": [{"id": "A", "gateway": True}],
        "links": [{"a": "A", "b": "Z", "capacity_mbps": 100, "latency_ms": 1}],
    })
    assert error.location.endswith("links[0].b")


def test_duplicate_site_id_is_rejected():
    error = _load_error({"name": "bad", "sites": [{"id": "A", "gateway": True}, {"id": "A"}]})
    assert "duplicate site id" in str(error)


def test_topology_needs_a_gateway():
    error = _load_error({"name": "bad", "sites": [{"id": "A"}, {"id": "B"}]})
    assert "gateway" in str(error)


def test_duplicate_link_is_rejected():
    error = _load_error({
        "name": "bad",
        "sites": [{"id": "A", "gateway": True}, {"id": "B"}],
        "links": [
            {"a": "A", "b": "B", "capacity_mbps": 100, "latency_ms": 1},
            {"a": "B", "b": "A", "capacity_mbps": 100, "latency_ms": 1},
        ],
    })
    assert error.location.endswith("links[1]")


def test_self_loop_is_rejected():
    error = _load_error({
        "name": "bad",
        "sites": [{"id": "A", "gateway": True}],
        "links": [{"a": "A", "b": "A", "capacity_mbps": 100, "latency_ms": 1}],
    })
    assert "differ" in str(error)


@pytest.mark.parametrize("capacity", [0, -10])
def test_capacity_must_be_positive(capacity):
    error = _load_error({
        "name": "bad",
        "sites": [{"id": "A", "gateway": True}, {"id": "B"}],
        "links": [{"a": "A", "b": "B", "capacity_mbps": capacity, "latency_ms": 1}],
    })
    assert error.location.endswith("links[0].capacity_mbps")


def test_missing_latency_without_coordinates_is_rejected():
    error = _load_error({
        "name": "bad",
        "sites": [{"id": "A", "gateway": True}, {"id": "B"}],
        "links": [{"a": "A", "b": "B", "capacity_mbps": 100}],
    })
    assert "no coordinates" in str(error)


def test_unknown_field_is_rejected():
    error = _load_error({"name": "bad", "sites": [{"id": "A", "gateway": True, "colour": "red"}]})
    assert "colour" in str(error)


def test_malformed_json_reports_line_and_column(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "name": "x",\n  "sites": [\n}', encoding="utf-8")
    with pytest.raises(TopologyError) as info:
        load_topology(path)
    assert info.value.location.startswith(f"{path}:4:")


def test_missing_file_is_a_topology_error(tmp_path):
    with pytest.raises(TopologyError):
        load_topology(tmp_path / "absent.json")


def test_save_then_load_reproduces_the_topology(rnp_sample, tmp_path):
    path = tmp_path / "copy.json"
    save_topology(rnp_sample, path)
    reloaded = load_topology(path)
    assert reloaded == rnp_sample
    assert all("latency_ms" in link for link in json.loads(path.read_text())["links"])


@pytest.mark.parametrize("name", ["two_site", "triangle", "chain", "ring4", "figure1", "bowtie", "rnp_sample"])
def test_bundled_topologies_load(name):
    topology = load_topology(DATA_DIR / f"{name}.json")
    assert topology.name == name
    assert topology.gateways


@pytest.mark.parametrize("field, link", [
    ("capacity_mbps", '{"a": "A", "b": "B", "capacity_mbps": Infinity, "latency_ms": 1}'),
    ("latency_ms", '{"a": "A", "b": "B", "capacity_mbps": 4800, "latency_ms": Infinity}'),
])
def test_infinite_link_values_are_rejected(field, link):
    text = f'{{"name": "inf", "sites": [{{"id": "A", "gateway": true}}, {{"id": "B"}}], "links": [{link}]}}'
    with pytest.raises(TopologyError) as info:
        TopologyLoader().loads(text, source="inf.json")
    assert info.value.location == f"inf.json: links[0].{field}"


def test_file_that_is_not_utf8_reports_its_path(tmp_path):
    path = tmp_path / "latin1.json"
    path.write_bytes(b'{"name": "S\xe3o Paulo", "sites": []}')
    with pytest.raises(TopologyError) as info:
        load_topology(path)
    assert info.value.location == str(path)
    assert "UTF-8" in str(info.value)
