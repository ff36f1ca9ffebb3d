import json
import math

import numpy as np
import pytest

from cflab import scenarios as S
from cflab.integrator import IntegratorOptions


def test_registry_names():
    assert S.names() == ["sin2d", "lee2d", "lee_twisted", "nonexact_conservative",
                         "sphere_legendrian", "cotangent_attractor"]


def test_defaults():
    assert S.build("lee2d").params == {"a": 1.0, "b": math.sqrt(2.0)}
    assert S.build("lee_twisted").params["a"] == [math.sqrt(2.0), math.sqrt(3.0)]
    assert S.build("sphere_legendrian").params == {"n": 2}
    assert S.build("cotangent_attractor").params == {"kappa": 0.1, "r": -1.0, "p_bound": 0.5}


@pytest.mark.parametrize("name,params,key", [
    ("nosuch", {}, "name"),
    ("lee2d", {"c": 1}, "params.c"),
    ("lee2d", {"a": "one"}, "params.a"),
    ("lee2d", {"a": float("nan")}, "params.a"),
    ("sphere_legendrian", {"n": 1}, "params.n"),
    ("sphere_legendrian", {"n": 2.5}, "params.n"),
    ("lee_twisted", {"n": 3}, "params.a"),
    ("cotangent_attractor", {"r": -0.5}, "params.kappa"),
])
def test_build_errors_name_the_key(name, params, key):
    with pytest.raises(S.ConfigError) as info:
        S.build(name, params)
    assert info.value.key == key


def test_string_params_are_coerced():
    sc = S.build("lee_twisted", {"n": "3", "a": "1,2,3.5"})
    assert sc.params == {"n": 3, "a": [1.0, 2.0, 3.5]}


@pytest.mark.parametrize("data,key", [
    ({"name": "sin2d", "extra": 1}, "extra"),
    ({"params": {}}, "name"),
    ({"name": "sin2d", "integrator": {"rtl": 1e-9}}, "integrator.rtl"),
    ({"name": "sin2d", "integrator": {"rtol": -1}}, "integrator"),
    ({"name": "sin2d", "params": []}, "params"),
    ({"name": "sin2d", "expected": [{"check": "x"}]}, "expected[0]"),
    ([1, 2], "<root>"),
])
def test_config_errors(data, key):
    with pytest.raises(S.ConfigError) as info:
        S.ScenarioConfig.from_dict(data)
    assert info.value.key == key


def test_config_round_trip(tmp_path):
    cfg = S.ScenarioConfig.from_dict({"name": "lee2d", "params": {"a": 2.0}, "integrator": {"rtol": 1e-10}})
    assert cfg.integrator.rtol == 1e-10 and cfg.integrator.atol == 1e-9
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    again = S.ScenarioConfig.from_json(path)
    assert again == cfg
    path.write_text("{not json")
    with pytest.raises(S.ConfigError):
        S.ScenarioConfig.from_json(path)


def test_expected_override_changes_verdict():
    cfg = S.ScenarioConfig.from_dict({"name": "sin2d", "expected": [
        {"check": "return_time", "target": 0.2, "tol": 1e-9}]})
    sc = S.build_from_config(cfg)
    rep = S.verify(sc, only={"return_time", "field_closed_form"})
    by_id = {r.id: r for r in rep.results}
    assert not by_id["return_time"].passed
    assert by_id["field_closed_form"].passed
    assert not rep.passed
    with pytest.raises(S.ConfigError):
        S.build("sin2d", expected=[("nosuch", 0.0, 1.0)])


def test_sin_closed_form_values():
    x, y, r = S.sin_closed_form([0.0, 0.25], 0.0)
    assert (x, y, r) == (0.0, pytest.approx(0.25), 0.0)
    # tan(pi y) = e^{2 pi t}: at t = 1/(2 pi) the tangent is e
    _, y, r = S.sin_closed_form([0.0, 0.25], 1 / (2 * math.pi))
    assert math.tan(math.pi * y) == pytest.approx(math.e)
    assert r == pytest.approx(math.log(math.e / (1 + math.e ** 2)) - math.log(0.5))


def test_off_band():
    y = np.array([0.0, 0.04, 0.06, 0.47, 0.96, 0.25])
    assert S.off_band(y, 0.05).tolist() == [False, False, True, False, False, True]


def test_samplers_respect_exclusions():
    sc = S.build("sin2d")
    assert np.all(S.off_band(sc.sample(200, 1)[:, 1], 0.05))
    cot = S.build("cotangent_attractor")
    pts = cot.sample(200, 1)
    assert np.all(np.abs(cot.system.H(pts)) > 1e-3)
    sph = S.build("sphere_legendrian")
    assert np.allclose(np.linalg.norm(sph.sample(50, 1), axis=1), 1.0)
    assert np.array_equal(sc.sample(5, 3), sc.sample(5, 3))


def test_cotangent_forces_full_trajectories():
    sc = S.build("cotangent_attractor", options=IntegratorOptions(stop_on_exit=True))
    assert sc.options.stop_on_exit is False


@pytest.mark.parametrize("name", ["sin2d", "lee2d", "lee_twisted", "nonexact_conservative",
                                  "sphere_legendrian", "cotangent_attractor"])
def test_verify_passes(name):
    rep = S.verify(S.build(name), seed=0, threads=2)
    failed = [(r.id, r.measured, r.deviation) for r in rep.results if not r.passed]
    assert failed == []
    assert rep.to_dict()["passed"] is True


def test_verify_rational_twisted_matches_enumeration():
    sc = S.build("lee_twisted", {"a": [0.5, 1 / 3]})
    rep = S.verify(sc, only={"periodic_search_matches_enumeration", "periodic_orbit_count", "periodic_orbits_close"})
    assert rep.passed
    count = next(r for r in rep.results if r.id == "periodic_orbit_count").measured
    assert count > 0


def test_verify_independent_of_threads_and_subset():
    sc = S.build("sin2d")
    a = S.verify(sc, seed=3, threads=1, only={"leaf_identity", "endpoint_closed_form"})
    b = S.verify(S.build("sin2d"), seed=3, threads=4, only={"leaf_identity"})
    assert a.results[-1].measured == b.results[0].measured
