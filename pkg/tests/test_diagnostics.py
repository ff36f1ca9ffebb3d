import math
from dataclasses import replace

import numpy as np
import pytest

from cflab.diagnostics import (
    Attractor,
    GridSpec,
    Label,
    SingularPointError,
    asymptotic_cycle,
    basin_map,
    basin_to_csv,
    classify_samples,
    classify_winding,
    forward_backward_labels,
    labels_agree,
    leaf_trace,
    lee_periodic_orbit_enumeration,
    lee_periodic_orbit_search,
    omega_limit_estimate,
    recurrence_distances,
    recurrence_stats,
)
from cflab.geometry import flat_torus
from cflab.hamiltonian import HamiltonianSystem
from cflab.integrator import Trajectory, integrate

TAU = 2 * math.pi


def _traj(t, r):
    t = np.asarray(t, dtype=float)
    return Trajectory(t, np.zeros((len(t), 2)), np.asarray(r, dtype=float))


def test_classify_synthetic_windings():
    t = np.linspace(0, 40, 401)
    assert classify_winding(_traj(t, -t)).label == Label.DISSIPATIVE_PLUS
    assert classify_winding(_traj(t, 0.1 * np.sin(t))).label == Label.CONSERVATIVE_PLUS
    # slow drift: neither flat nor large
    assert classify_winding(_traj(t, 0.2 * t)).label == Label.UNDETERMINED
    assert classify_winding(_traj(-t, t)).label == Label.DISSIPATIVE_MINUS
    assert classify_winding(_traj(-t, np.zeros_like(t))).label == Label.CONSERVATIVE_MINUS


def test_short_horizon_is_undetermined():
    t = np.linspace(0, 5, 51)
    with pytest.warns(UserWarning, match="characteristic"):
        wc = classify_winding(_traj(t, -10 * t))
    assert wc.label == Label.UNDETERMINED
    assert wc.to_dict()["label"] == "Undetermined"


def test_classify_sin_orbits(sin_sc):
    tr = integrate(sin_sc.system, [0.1, 0.3], 40.0, sin_sc.options)
    wc = classify_winding(tr)
    assert wc.label == Label.DISSIPATIVE_PLUS
    assert wc.r_final < -20
    # on the repelling circle eta(X) = 2 pi, so the winding grows linearly
    on = integrate(sin_sc.system, [0.1, 0.0], 40.0, sin_sc.options)
    wc = classify_winding(on)
    assert wc.label == Label.DISSIPATIVE_PLUS
    assert wc.r_final == pytest.approx(40 * TAU, rel=1e-9)


def test_forward_backward_sin(sin_sc):
    fwd, bwd = forward_backward_labels(sin_sc.system, sin_sc.sample(8, 0), 40.0, sin_sc.options, threads=1)
    assert all(f.label == Label.DISSIPATIVE_PLUS for f in fwd)
    assert all(b.label == Label.DISSIPATIVE_MINUS for b in bwd)
    assert all(labels_agree(f, b) for f, b in zip(fwd, bwd))


def test_omega_limit_on_attractor(sin_sc):
    tr = integrate(sin_sc.system, [0.1, 0.3], 40.0, sin_sc.options, t_eval=np.linspace(0, 40, 401))
    cloud, hmax = omega_limit_estimate(tr, 0.1, sin_sc.system.H)
    assert np.allclose(cloud[:, 1], 0.5, atol=1e-8)
    assert hmax < 1e-4
    with pytest.raises(ValueError):
        omega_limit_estimate(tr, 1.5)


def test_grid_points_layout():
    g = GridSpec(axes=(1, 3), n=(2, 3), lo=(0, -1), hi=(1, 1), base=(5, 0, 0, 7))
    idx, pts = g.points()
    assert idx[:3] == [(0, 0), (0, 1), (0, 2)]
    assert np.allclose(pts[1], [5, 0, 0, -1 + 2 / 3])
    g2 = replace(g, endpoint=True)
    assert np.allclose(g2.points()[1][-1], [5, 1, 0, 1])


def test_basin_map_sin(sin_sc):
    grid = replace(sin_sc.grid, n=(4, 8))
    cells = basin_map(sin_sc.system, grid, sin_sc.attractors, 40.0, sin_sc.options, threads=1)
    by_y = {round(c.x0[1], 6): c.label for c in cells}
    assert by_y[0.0] == "Undetermined"
    assert all(lab == "circle_y_half" for y, lab in by_y.items() if y != 0.0)
    text = basin_to_csv(cells, grid)
    assert text.splitlines()[0] == "i,j,x,y,label,r_final"
    assert len(text.splitlines()) == 33


def test_basin_with_two_attractors(sin_sc):
    near_zero = Attractor("zero", lambda x: np.abs(np.asarray(x)[..., 1]), 1e-9)
    grid = replace(sin_sc.grid, n=(1, 4))
    cells = basin_map(sin_sc.system, grid, (near_zero,) + sin_sc.attractors, 40.0, sin_sc.options, threads=1)
    assert [c.label for c in cells] == ["zero", "circle_y_half", "circle_y_half", "circle_y_half"]


def test_recurrence_lee_vs_sin(lee_sc, sin_sc):
    pts = np.array([[0.2, 0.4], [0.7, 0.1]])
    d_lee = recurrence_distances(lee_sc.system, pts, 200.0, opts=lee_sc.options)
    assert np.all(d_lee < 0.05)
    assert recurrence_stats(sin_sc.system, sin_sc.sample(10, 0), 40.0, 0.05, opts=sin_sc.options) == 0.0
    with pytest.raises(ValueError):
        recurrence_stats(sin_sc.system, pts, 40.0, 0.0)


def test_recurrence_periodic_orbit_exact(sin_sc):
    # the attracting circle is periodic with period 1 / (2 pi)
    d = recurrence_distances(sin_sc.system, [[0.3, 0.5]], 2.0, opts=sin_sc.options)
    assert d[0] < 0.0125


def test_leaf_identity_and_convergence(sin_sc):
    seeds = np.array([[0.1, 0.2], [0.7, 0.8], [0.4, 0.05]])
    coarse = max(leaf_trace(sin_sc.system, s, 2.0, steps=200).residual for s in seeds)
    fine = max(leaf_trace(sin_sc.system, s, 2.0, steps=400).residual for s in seeds)
    assert fine <= 1e-8
    assert coarse / fine > 10
    lt = leaf_trace(sin_sc.system, seeds[0], 1.0, steps=100)
    assert lt.curve.shape == (101, 2)
    assert np.allclose(np.linalg.norm(np.diff(lt.curve, axis=0), axis=1), 0.01, atol=1e-6)


def test_leaf_singular_point():
    m = flat_torus(1, (1.0, 0.0))
    sys = HamiltonianSystem(m, lambda x: np.zeros(np.shape(x)[:-1]))
    with pytest.raises(SingularPointError):
        leaf_trace(sys, [0.1, 0.2], 1.0)


def test_lee_search_rational_example():
    found = lee_periodic_orbit_search(2, (0.5, 1 / 3), 10.0, 3)
    by_w = {c.w: c.tau for c in found}
    # w = (1, 0): <a, w> = 1/2, so k = 2 and tau = 2
    assert by_w[(1, 0)] == pytest.approx(2.0)
    assert by_w[(0, 1)] == pytest.approx(3.0)
    assert found == sorted(found, key=lambda c: c.w)


def test_lee_search_zero_form():
    found = lee_periodic_orbit_search(2, (0.0, 0.0), 5.0, 2)
    # every primitive direction closes after one lattice length
    for c in found:
        assert c.tau == pytest.approx(np.linalg.norm(c.w))
    assert len(found) == 16


@pytest.mark.parametrize("a", [(0.5, 1 / 3), (0.25, 0.75), (math.sqrt(2), 0.5)])
def test_lee_search_matches_enumeration(a):
    s = lee_periodic_orbit_search(2, a, 20.0, 8)
    e = lee_periodic_orbit_enumeration(2, a, 20.0, 8)
    assert [c.w for c in s] == [c.w for c in e]
    assert np.allclose([c.tau for c in s], [c.tau for c in e])


def test_lee_search_irrational_empty():
    assert lee_periodic_orbit_search(2, (math.sqrt(2), math.sqrt(3)), 50.0, 20) == []
    with pytest.raises(ValueError):
        lee_periodic_orbit_search(2, (1.0,), 5.0, 2)


def test_asymptotic_cycle_lee(lee_sc):
    tr = integrate(lee_sc.system, [0.2, 0.4], 200.0, lee_sc.options)
    A = asymptotic_cycle(tr, [(1.0, 0.0), (0.0, 1.0)])
    assert np.allclose(A, [-math.sqrt(2), 1.0], atol=1e-9)
    # a callable form integrates through the field
    B = asymptotic_cycle(tr, [lambda x: np.broadcast_to([1.0, 0.0], x.shape)], sys=lee_sc.system)
    assert B[0] == pytest.approx(-math.sqrt(2), abs=1e-9)
    with pytest.raises(ValueError):
        asymptotic_cycle(tr, [lambda x: x])


def test_classify_samples_batch():
    t = np.linspace(0, 40, 201)
    r = np.stack([-t, np.zeros_like(t)], axis=1)
    labels = [c.label for c in classify_samples(t, r)]
    assert labels == [Label.DISSIPATIVE_PLUS, Label.CONSERVATIVE_PLUS]
