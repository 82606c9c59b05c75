import json
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zonesim.model import (
    EXTERIOR,
    MATERIALS,
    AirLink,
    BuildingFileError,
    Layer,
    LinkKind,
    Material,
    Wall,
    WallConstruction,
    Zone,
    building_from_dict,
    building_to_dict,
    discretize_wall,
    dump_building,
    load_building,
    validate_building,
    wall_u_value,
    zone_faces,
)
from zonesim.scenarios import build_collector, build_trombe

from conftest import box, sandwich


def test_collector_model_is_valid():
    assert validate_building(build_collector()) == []


def test_unresolved_zone_reference(single_box):
    bad = replace(single_box, walls=single_box.walls + (Wall("x", sandwich(), 1.0, "99", EXTERIOR),))
    violations = validate_building(bad)
    assert len(violations) == 1
    assert violations[0].where == "wall x"
    assert "99" in violations[0].message


def test_link_exponent_out_of_range(single_box):
    link = AirLink("c", LinkKind.CRACK, 0.01, 0.3, 0.01, 1.0, "z", EXTERIOR)
    violations = validate_building(replace(single_box, links=(link,)))
    assert len(violations) == 1
    assert "exponent" in violations[0].message


def test_violations_sorted_and_complete(single_box):
    bad = replace(single_box, zones=(replace(single_box.zones[0], volume=-1.0),), albedo=2.0,
                  walls=single_box.walls + (Wall("y", sandwich(), 1.0, "z", "z"),))
    violations = validate_building(bad)
    assert violations == sorted(violations)
    assert len(violations) >= 3


def test_disconnected_zone_reported(single_box):
    orphan = Zone("orphan", 5.0)
    bad = replace(single_box, zones=single_box.zones + (orphan,))
    assert any("orphan" in v.where for v in validate_building(bad))


def test_single_layer_single_node():
    m = MATERIALS["concrete"]
    chain = discretize_wall(WallConstruction((Layer(m, 0.2),)))
    assert chain.n_nodes == 3
    assert chain.capacitance[1] == pytest.approx(m.density * m.specific_heat * 0.2)
    assert chain.capacitance[0] == chain.capacitance[2] == 0.0


def test_sandwich_resistance():
    c = sandwich()
    assert c.resistance == pytest.approx(1.383, abs=5e-4)
    assert discretize_wall(c).resistance == pytest.approx(c.resistance, rel=1e-12)


@pytest.mark.parametrize("nodes", [1, 2, 4, 8])
def test_refinement_keeps_conductance_and_capacitance(nodes):
    c = sandwich(nodes)
    chain = discretize_wall(c)
    assert chain.resistance == pytest.approx(sandwich().resistance, rel=1e-12)
    assert chain.capacitance.sum() == pytest.approx(c.areal_capacitance, rel=1e-12)


def test_thin_end_layer_merged_into_surface():
    metal, poly = MATERIALS["metal_sheet"], MATERIALS["polystyrene"]
    c = WallConstruction((Layer(poly, 0.05), Layer(metal, 0.0005)))
    chain = discretize_wall(c)
    assert chain.n_nodes == 3
    assert chain.capacitance[-1] == pytest.approx(metal.density * metal.specific_heat * 0.0005)
    assert chain.resistance == pytest.approx(c.resistance)


def test_massless_construction():
    chain = discretize_wall(replace(sandwich(3), massless=True))
    assert not chain.capacitance.any()
    assert chain.resistance == pytest.approx(sandwich().resistance)


def test_bad_thickness_rejected():
    with pytest.raises(ValueError):
        discretize_wall(WallConstruction((Layer(MATERIALS["wood"], 0.0),)))


def test_u_value_with_films():
    w = Wall("w", sandwich(), 1.0, "z", EXTERIOR, h_ci=8.0, h_ce=25.0)
    assert wall_u_value(w) == pytest.approx(1.0 / (sandwich().resistance + 0.125 + 0.04))
    assert wall_u_value(w) == pytest.approx(0.646, abs=1e-3)


def test_u_value_unit_layer_no_films():
    c = WallConstruction((Layer(Material(1.0, 1.0, 1.0), 1.0),))
    assert wall_u_value(Wall("w", c, 1.0, "z", EXTERIOR, h_ci=0.0, h_ce=0.0)) == pytest.approx(1.0)


@given(st.floats(0.001, 0.5), st.floats(0.001, 0.2))
def test_u_value_decreases_with_thickness(e, extra):
    def u(t):
        layers = (Layer(MATERIALS["wood"], 0.01), Layer(MATERIALS["polystyrene"], t))
        return wall_u_value(Wall("w", WallConstruction(layers), 1.0, "z", EXTERIOR))
    assert u(e + extra) < u(e)


@settings(max_examples=50)
@given(st.lists(st.tuples(st.sampled_from(sorted(MATERIALS)), st.floats(0.002, 0.3)), min_size=1, max_size=4),
       st.integers(1, 6))
def test_chain_invariants(spec, nodes):
    c = WallConstruction(tuple(Layer(MATERIALS[m], e) for m, e in spec), nodes_per_layer=nodes)
    chain = discretize_wall(c)
    assert chain.resistance == pytest.approx(c.resistance, rel=1e-9)
    assert chain.capacitance.sum() == pytest.approx(c.areal_capacitance, rel=1e-9)
    assert np.all(chain.conductance > 0)


def test_json_round_trip(tmp_path):
    model = build_trombe()
    path = tmp_path / "b.json"
    dump_building(model, path)
    assert load_building(path) == model


def test_json_material_override():
    d = building_to_dict(box())
    d["materials"] = {"wood": {"conductivity": 0.3, "density": 600, "specific_heat": 1600}}
    d["walls"][0]["construction"]["layers"][0]["material"] = "wood"
    model = building_from_dict(d)
    assert model.wall("w").construction.layers[0].material.conductivity == 0.3


def test_malformed_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(BuildingFileError):
        load_building(p)
    d = building_to_dict(box())
    del d["zones"][0]["volume"]
    with pytest.raises(BuildingFileError):
        building_from_dict(json.loads(json.dumps(d)))


def test_zone_faces_floor_detection(single_box):
    faces = {f.id: f for f in zone_faces(single_box, "z")}
    assert faces["f:in"].is_floor
    assert not faces["w:in"].is_floor
