import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from neurobilevel.instance import (BilevelInstance, InstanceFormatError, LowerKind, coefficient_range,
                                   fixture_phi, fixture_upper_objective, generate_instance, illustrative_fixture,
                                   load_instance, save_instance, validate_instance)


def _ranges_hold(inst):
    n, m = inst.n, inst.m
    checks = {"c": inst.c, "d": inst.d1, "A1": inst.A1, "b1": inst.b1, "A2": inst.A2, "B2": inst.B2, "b2": inst.b2}
    for key, arr in checks.items():
        lo, hi = coefficient_range(key, n, m)
        if arr.min() < lo or arr.max() > hi:
            return False
    return True


def test_generated_entries_inside_ranges_with_delta_five():
    inst = generate_instance(20, 20, "Continuous", seed=7)
    assert 200 / (inst.m + inst.n) == 5.0
    assert coefficient_range("A1", 20, 20) == (-10.0, 10.0)
    assert coefficient_range("A2", 20, 20) == (-50.0, 50.0)
    assert coefficient_range("B2", 20, 20) == (-5.0, 5.0)
    assert coefficient_range("b1", 20, 20) == (30.0, 130.0)
    assert _ranges_hold(inst)
    assert np.all(inst.y_upper == 1.0)
    assert inst.lower_kind is LowerKind.CONTINUOUS


@given(n=st.integers(1, 15), m=st.integers(1, 15), seed=st.integers(0, 2 ** 31), kind=st.sampled_from(["lp", "milp"]))
def test_generator_ranges_and_equal_costs(n, m, seed, kind):
    inst = generate_instance(n, m, kind, seed)
    assert _ranges_hold(inst)
    assert np.array_equal(inst.d1, inst.d2)
    assert validate_instance(inst) == []


def test_generator_is_deterministic():
    a = generate_instance(10, 20, "Integer", seed=3)
    b = generate_instance(10, 20, "Integer", seed=3)
    assert a == b
    assert a.lower_kind is LowerKind.INTEGER
    assert generate_instance(10, 20, "Integer", seed=4) != a


def test_generator_rejects_bad_sizes():
    with pytest.raises(ValueError):
        generate_instance(0, 3)


def test_instance_arrays_are_read_only():
    inst = generate_instance(3, 3, seed=0)
    with pytest.raises(ValueError):
        inst.c[0] = 1.0


def test_validate_reports_bad_shapes_and_bounds():
    inst = generate_instance(4, 5, seed=1)
    doc = inst.to_dict()
    doc["A2"] = doc["A2"][:-1]
    bad = BilevelInstance(**{k: v for k, v in doc.items()})
    problems = validate_instance(bad)
    assert len(problems) == 1 and "A2" in problems[0]

    doc = inst.to_dict()
    doc["y_upper"][2] = -1.0
    problems = validate_instance(BilevelInstance(**doc))
    assert len(problems) == 1 and "y_upper" in problems[0]


def test_roundtrip_is_exact(tmp_path):
    inst = generate_instance(7, 9, "Integer", seed=11)
    path = tmp_path / "inst.json"
    save_instance(inst, path)
    back = load_instance(path)
    assert back == inst
    assert back.lower_kind is LowerKind.INTEGER
    assert back.name == inst.name


def test_missing_field_is_named(tmp_path):
    doc = generate_instance(3, 3, seed=0).to_dict()
    del doc["b2"]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(InstanceFormatError, match="b2"):
        load_instance(path)


def test_malformed_json_names_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n "n": 2,\n "m": oops\n}')
    with pytest.raises(InstanceFormatError, match="line 3"):
        load_instance(path)


def test_non_numeric_field_is_named(tmp_path):
    doc = generate_instance(2, 2, seed=0).to_dict()
    doc["c"] = ["a", "b"]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(InstanceFormatError, match="field c"):
        load_instance(path)


def test_lower_kind_spellings():
    assert LowerKind.parse("Integer") is LowerKind.INTEGER
    assert LowerKind.parse("lp") is LowerKind.CONTINUOUS
    with pytest.raises(ValueError):
        LowerKind.parse("quadratic")


class TestFixture:
    def test_phi_table(self):
        fx = illustrative_fixture()
        assert fx.phi_table[(0, 0)] == -1.0
        assert fx.phi_table[(1, 1)] == -1.0
        assert fx.phi_table[(0, 1)] == 0.0
        assert fx.phi_table[(1, 0)] == 0.0

    def test_phi_table_matches_grid_search(self):
        # follower maximises -(y-2)^2 over 0 <= y <= 1 + 2|x1 - x2|
        fx = illustrative_fixture()
        for (x1, x2), phi in fx.phi_table.items():
            ys = np.linspace(0.0, 1.0 + 2.0 * abs(x1 - x2), 300001)
            assert abs(np.max(-(ys - 2.0) ** 2) - phi) <= 1e-9
            assert phi == fixture_phi(x1, x2)

    def test_closed_form_nets(self):
        fx = illustrative_fixture()
        assert fx.gnn_closed_form.forward(np.array([1, 1])) == -1.0
        for x, phi in fx.phi_table.items():
            assert fx.gnn_closed_form.forward(np.array(x)) == phi
            assert fx.isnn_closed_form.forward(np.array(x)) == phi

    def test_known_optimum(self):
        fx = illustrative_fixture()
        x, f = fx.known_optimum
        assert x == (0, 1)
        assert f == -5.0 == fixture_upper_objective(0, 1, 2.0)
