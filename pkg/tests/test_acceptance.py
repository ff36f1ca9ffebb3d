"""Exit criteria of the laboratory, run at their full sizes.

Each test records one PASS/FAIL line (printed in the terminal summary and,
with ``-s``, inline) before asserting.
"""

import math
import subprocess
import sys
import time
from dataclasses import replace

import numpy as np
import pytest

from cflab import scenarios as S
from cflab.diagnostics import (
    Label,
    asymptotic_cycle,
    classify_samples,
    forward_backward_agreement,
    leaf_trace,
    lee_periodic_orbit_enumeration,
    lee_periodic_orbit_search,
    recurrence_distances,
)
from cflab.geometry import closure_tolerance, d_eta_closure_check
from cflab.integrator import integrate, integrate_many, return_map_jacobian
from cflab.lyapunov import lyapunov_spectrum

from conftest import ACCEPTANCE

pytestmark = pytest.mark.acceptance
TAU = 2 * math.pi
SEED = 7


def record(k, ok, detail):
    ACCEPTANCE[k] = (bool(ok), detail)
    print(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def test_c01_conformal_identities(sin_sc, lee_sc, cot_sc):
    start = time.perf_counter()
    rows = {}
    for sc in (sin_sc, lee_sc, cot_sc):
        rows[sc.name] = S.conformal_residuals(sc.system, sc.sample(100, SEED), 20.0,
                                              replace(sc.options, rtol=1e-9, atol=1e-9))
    elapsed = time.perf_counter() - start
    ok = all(s <= 1e-6 and t <= 1e-5 and v <= 1e-6 for s, t, v in rows.values()) and elapsed < 30
    detail = "; ".join(f"{k}: H {s:.1e} V {t:.1e} det {v:.1e}" for k, (s, t, v) in rows.items())
    record(1, ok, f"{detail}; {elapsed:.1f} s")
    for s, t, v in rows.values():
        assert s <= 1e-6
        assert t <= 1e-5
        assert v <= 1e-6
    assert elapsed < 30


def test_c02_dissipation_dichotomy(sin_sc, lee_sc):
    d = S.dichotomy_grid(sin_sc, 64, 40.0, eps=0.05)
    frac = S._dissipative_fraction(d)
    rec_sin = float(np.mean(d["recurrence_distance"] <= 0.05))

    pts = lee_sc.sample(400, SEED)
    T = 1000.0
    b = integrate_many(lee_sc.system, pts, T, lee_sc.options, np.linspace(0.0, T, 2001))
    cons = float(np.mean([c.label == Label.CONSERVATIVE_PLUS for c in classify_samples(b.t, b.r)]))
    rec_lee = float(np.mean(recurrence_distances(lee_sc.system, pts, T, opts=lee_sc.options) <= 0.05))

    ok = frac >= 0.99 and rec_sin == 0.0 and cons == 1.0 and rec_lee == 1.0
    record(2, ok, f"sin2d {len(d['points'])} cells: dissipative {frac:.4f}, recurrent {rec_sin}; "
                  f"lee2d 400 samples: conservative {cons}, recurrent {rec_lee}")
    assert frac >= 0.99
    assert rec_sin == 0.0
    assert cons == 1.0
    assert rec_lee == 1.0


def test_c03_past_future_coincidence(sin_sc, cot_sc):
    agree = {sc.name: forward_backward_agreement(sc.system, sc.sample(256, SEED), 40.0, sc.options)
             for sc in (sin_sc, cot_sc)}
    ok = all(v >= 0.99 for v in agree.values())
    record(3, ok, ", ".join(f"{k} {v:.4f}" for k, v in agree.items()))
    for v in agree.values():
        assert v >= 0.99


def test_c04_lyapunov_symmetry(sin_sc, cot_sc):
    rs = lyapunov_spectrum(sin_sc.system, [0.0, 0.5], 200.0, 0.5, sin_sc.options)
    rc = lyapunov_spectrum(cot_sc.system, np.zeros(4), 200.0, 0.5, cot_sc.options)
    want_c = np.sort([-0.2 * math.pi, 0.0, -1.0 + 0.2 * math.pi, -1.0])
    ok_s = (np.max(np.abs(rs.exponents - [-TAU, 0.0])) <= 1e-2 and np.max(np.abs(rs.residuals)) <= 1e-2
            and abs(rs.r_bar + TAU) <= 1e-3)
    ok_c = np.max(np.abs(rc.exponents - want_c)) <= 1e-2 and np.max(np.abs(rc.residuals)) <= 1e-2
    record(4, ok_s and ok_c, f"sin2d {np.round(rs.exponents, 5).tolist()} rbar {rs.r_bar:.6f}; "
                             f"cotangent {np.round(rc.exponents, 5).tolist()}")
    assert np.allclose(rs.exponents, [-TAU, 0.0], atol=1e-2, rtol=0)
    assert np.max(np.abs(rs.residuals)) <= 1e-2
    assert rs.r_bar == pytest.approx(-TAU, abs=1e-3)
    assert np.allclose(rc.exponents, want_c, atol=1e-2, rtol=0)
    assert np.max(np.abs(rc.residuals)) <= 1e-2


def test_c05_hyperbolic_attracting_orbit(cot_sc):
    c, d, direction = cot_sc.sections["q1=0"]
    J, _ = return_map_jacobian(cot_sc.system, np.zeros(4), (c, d), direction, cot_sc.options, t_min=0.5)
    mult = np.sort(np.linalg.eigvals(J).real)
    want = np.sort([math.exp(-0.2 * math.pi), math.exp(-1.0), math.exp(-1.0 + 0.2 * math.pi)])
    ok = np.max(np.abs(mult - want)) <= 1e-3 and np.all((mult > 0) & (mult < 1))
    record(5, ok, f"multipliers {np.round(mult, 6).tolist()}")
    assert np.allclose(mult, want, atol=1e-3, rtol=0)


def test_c06_legendrian_attractor():
    sc = S.build("sphere_legendrian")
    model = sc.flow_model
    dplus, dminus = model.sets["L+"], model.sets["L-"]
    pts = sc.sample(100, SEED)
    assert min(dminus(z) for z in pts) >= 0.1
    capture = max(float(dplus(model.flow(z, 10.0))) for z in pts)
    rng = np.random.default_rng(SEED)
    inv = 0.0
    for x in rng.standard_normal((50, 2)):
        z = np.concatenate([x, x]) / (math.sqrt(2.0) * np.linalg.norm(x))
        for t in (-10.0, -1.0, 1.0, 10.0):
            inv = max(inv, float(dplus(model.flow(z, t))))
    ok = capture <= 1e-4 and inv <= 1e-10
    record(6, ok, f"distance to L+ {capture:.2e}, invariance {inv:.1e}")
    assert capture <= 1e-4
    assert inv <= 1e-10


def test_c07_lee_aperiodicity():
    irr = lee_periodic_orbit_search(2, [math.sqrt(2), math.sqrt(3)], 50.0, 20)
    rat = lee_periodic_orbit_search(2, [0.5, 1.0 / 3.0], 50.0, 20)
    oracle = lee_periodic_orbit_enumeration(2, [0.5, 1.0 / 3.0], 50.0, 20)
    same = [c.w for c in rat] == [o.w for o in oracle] and all(
        abs(c.tau - o.tau) <= 1e-12 for c, o in zip(rat, oracle))
    ok = not irr and same and len(rat) > 0
    record(7, ok, f"irrational: {len(irr)} orbits; rational: {len(rat)} found, {len(oracle)} enumerated")
    assert irr == []
    assert len(rat) > 0
    assert same


def test_c08_leaf_identity(sin_sc):
    seeds = np.random.default_rng(SEED).random((20, 2))
    coarse = max(leaf_trace(sin_sc.system, s, 2.0).residual for s in seeds)
    fine = max(leaf_trace(sin_sc.system, s, 2.0, steps=2000).residual for s in seeds)
    ok = coarse <= 1e-8 and coarse / fine >= 3
    record(8, ok, f"residual {coarse:.2e}, halved step {fine:.2e} (ratio {coarse / fine:.1f})")
    assert coarse <= 1e-8
    assert coarse / fine >= 3


def test_c09_asymptotic_cycle(lee_sc):
    # With i_X w = dH - H eta and w = dx^dy the Lee field of eta = dx + sqrt2 dy is
    # (-sqrt2, 1); the orientation of the expected vector follows that convention.
    a, b = lee_sc.params["a"], lee_sc.params["b"]
    tr = integrate(lee_sc.system, [0.2, 0.4], 1000.0, lee_sc.options)
    A = asymptotic_cycle(tr, [(1.0, 0.0), (0.0, 1.0)])
    pairing = float(np.dot([a, b], A))
    want = np.array([-math.sqrt(2.0), 1.0])
    ok = np.max(np.abs(A - want)) <= 1e-3 and abs(pairing) <= 1e-6
    record(9, ok, f"A = {np.round(A, 8).tolist()}, <[eta], A> = {pairing:.1e}")
    assert np.allclose(A, want, atol=1e-3, rtol=0)
    assert abs(pairing) <= 1e-6


def test_c10_structure_validity(sin_sc, lee_sc, cot_sc):
    worst = {}
    for sc in (sin_sc, lee_sc, cot_sc):
        m = sc.system.model
        worst[sc.name] = max(d_eta_closure_check(m, p) / closure_tolerance(m, p) for p in sc.sample(100, SEED))
    m = cot_sc.system.model
    bad = replace(m, omega=lambda x: m.omega(x) * (1 + 0.1 * np.sin(TAU * np.asarray(x)[..., 1]))[..., None, None],
                  constant_omega=None)
    control = min(d_eta_closure_check(bad, p) / closure_tolerance(bad, p) for p in cot_sc.sample(100, SEED))
    ok = all(v <= 1.0 for v in worst.values()) and control > 1.0
    record(10, ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f" (residual/tol); perturbed {control:.1e}")
    for v in worst.values():
        assert v <= 1.0
    assert control > 1.0


def test_c11_determinism(tmp_path):
    reports = []
    for k, threads in enumerate((1, 4)):
        out = tmp_path / f"run{k}"
        proc = subprocess.run([sys.executable, "-c", "import sys; from cflab.cli import main; sys.exit(main())",
                               "verify", "--scenario", "all", "--out", str(out), "--threads", str(threads)],
                              capture_output=True, text=True)
        assert proc.returncode == 0, proc.stdout + proc.stderr
        reports.append(((out / "verify.json").read_bytes(), (out / "manifest.json").read_bytes()))
    ok = reports[0] == reports[1]
    record(11, ok, f"verify.json {len(reports[0][0])} bytes, identical across runs with 1 and 4 threads")
    assert reports[0][0] == reports[1][0]
    assert reports[0][1] == reports[1][1]
