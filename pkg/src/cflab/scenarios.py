"""Named, parameterised constructions with their expected diagnostics.

Each registered scenario builds a :class:`Scenario` bundle: the system to
integrate (or the closed-form flow), attractor and section descriptors, a
sampler for initial conditions and a table of checks.  :func:`verify`
runs that table and reports measured values next to their targets.

Registered names: ``sin2d``, ``lee2d``, ``lee_twisted``,
``nonexact_conservative``, ``sphere_legendrian``, ``cotangent_attractor``.
"""

from __future__ import annotations

import json
import math
import threading
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Optional

import numpy as np

from .diagnostics import (
    Attractor,
    GridSpec,
    Label,
    asymptotic_cycle,
    basin_map,
    classify_samples,
    forward_backward_agreement,
    leaf_trace,
    lee_periodic_orbit_enumeration,
    lee_periodic_orbit_search,
    recurrence_distances,
)
from .geometry import (
    closure_tolerance,
    conformal_cotangent_torus,
    contact_sphere_model,
    d_eta_closure_check,
    flat_torus,
    nonexact_conservative_model,
    torus_difference,
    twisted_symplectization_unit_torus,
)
from .hamiltonian import (
    ContactFlowSystem,
    HamiltonianSystem,
    cotangent_lift_flow,
    reeb_field,
    sphere_contact_system,
    symplectization_lift_field,
    unit_torus_bundle_contact_system,
)
from .integrator import (
    IntegratorOptions,
    integrate,
    integrate_many,
    monodromy,
    poincare_return,
    return_map_jacobian,
    sample_analytic,
)
from .lyapunov import lyapunov_spectrum

__all__ = [
    "ConfigError",
    "ParamSpec",
    "Check",
    "CheckResult",
    "ScenarioConfig",
    "Scenario",
    "VerifyReport",
    "REGISTRY",
    "DEFAULT_OPTIONS",
    "names",
    "build",
    "build_from_config",
    "verify",
    "conformal_residuals",
    "dichotomy_grid",
    "off_band",
]

TAU = 2.0 * math.pi
DEFAULT_OPTIONS = IntegratorOptions(rtol=1e-9, atol=1e-9)


class ConfigError(ValueError):
    """Malformed scenario configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParamSpec:
    """One scenario parameter: kind (``real``, ``int`` or ``vector``), default and range."""

    kind: str
    default: Any
    doc: str
    valid: Optional[Callable[[Any, dict], bool]] = None
    range_doc: str = ""

    def coerce(self, key, value):
        try:
            if self.kind == "int":
                if isinstance(value, str):
                    value = float(value)
                if float(value) != int(value):
                    raise ValueError
                value = int(value)
            elif self.kind == "real":
                value = float(value)
            else:
                if isinstance(value, str):
                    value = [float(v) for v in value.split(",") if v.strip()]
                elif np.isscalar(value):
                    value = [float(value)]
                value = [float(v) for v in value]
        except (TypeError, ValueError):
            raise ConfigError(key, f"expected a {self.kind} value, got {value!r}") from None
        if isinstance(value, float) and not math.isfinite(value):
            raise ConfigError(key, "value must be finite")
        return value


@dataclass(frozen=True)
class Check:
    """An expected result: ``|measured - target| <= tol`` (elementwise maximum).

    ``run(scenario, rng)`` returns the measured value (scalar or vector).
    """

    id: str
    doc: str
    target: Any
    tol: float
    run: Callable


@dataclass(frozen=True)
class CheckResult:
    id: str
    passed: bool
    measured: Any
    target: Any
    tol: float
    deviation: float

    def to_dict(self) -> dict:
        return {"id": self.id, "passed": self.passed, "measured": self.measured,
                "target": self.target, "tol": self.tol, "deviation": self.deviation}


@dataclass(frozen=True)
class ScenarioConfig:
    """Scenario name, parameter overrides, integrator settings and check overrides.

    ``expected`` entries ``(check_id, target, tol)`` replace the defaults of
    the named checks.
    """

    name: str
    params: dict = field(default_factory=dict)
    integrator: IntegratorOptions = DEFAULT_OPTIONS
    expected: tuple = ()

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        if not isinstance(data, dict):
            raise ConfigError("<root>", "a scenario config must be a JSON object")
        allowed = {"name", "params", "integrator", "expected"}
        for key in data:
            if key not in allowed:
                raise ConfigError(key, "unknown configuration key")
        if "name" not in data:
            raise ConfigError("name", "missing scenario name")
        name = data["name"]
        if name not in REGISTRY:
            raise ConfigError("name", f"unknown scenario {name!r}")
        params = {} if data.get("params") is None else data["params"]
        if not isinstance(params, dict):
            raise ConfigError("params", "must be an object")
        integ = {} if data.get("integrator") is None else data["integrator"]
        if not isinstance(integ, dict):
            raise ConfigError("integrator", "must be an object")
        merged = {**DEFAULT_OPTIONS.to_dict(), **integ}
        try:
            opts = IntegratorOptions.from_dict(merged)
        except KeyError as exc:
            raise ConfigError(f"integrator.{exc.args[0]}", "unknown integrator setting") from None
        except (TypeError, ValueError) as exc:
            raise ConfigError("integrator", str(exc)) from None
        expected = []
        for k, item in enumerate(data.get("expected", []) or []):
            try:
                expected.append((str(item["check"]), item["target"], float(item["tol"])))
            except (KeyError, TypeError, ValueError):
                raise ConfigError(f"expected[{k}]", "entries need check, target and tol") from None
        return cls(name, dict(params), opts, tuple(expected))

    @classmethod
    def from_json(cls, path) -> "ScenarioConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("<file>", f"invalid JSON: {exc}") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        out = {"name": self.name, "params": dict(self.params), "integrator": self.integrator.to_dict()}
        if self.expected:
            out["expected"] = [{"check": c, "target": t, "tol": tol} for c, t, tol in self.expected]
        return out


# ---------------------------------------------------------------------------
# scenario bundle
# ---------------------------------------------------------------------------


@dataclass
class Scenario:
    """Everything needed to run and check one named example.

    ``system`` is an integrable field (``None`` for purely closed-form
    scenarios, which expose ``flow_model`` instead).  ``sections`` map a
    name to ``(normal, offset, direction)``; ``periodic_orbits`` map a name
    to ``(point, period)``.  ``sampler(rng, n)`` draws initial conditions
    away from the invariant sets that the dichotomy excludes.
    """

    name: str
    params: dict
    options: IntegratorOptions
    system: Any = None
    flow_model: Any = None
    contact: Any = None
    attractors: tuple = ()
    sections: dict = field(default_factory=dict)
    periodic_orbits: dict = field(default_factory=dict)
    default_x0: Optional[np.ndarray] = None
    horizon: float = 40.0
    grid: Optional[GridSpec] = None
    sampler: Optional[Callable] = None
    checks: tuple = ()
    description: str = ""
    _memo: dict = field(default_factory=dict, repr=False)
    _lock: Any = field(default_factory=threading.Lock, repr=False)

    @property
    def dim(self) -> int:
        if self.system is not None:
            return self.system.dim
        return self.flow_model.ambient_dim

    @property
    def periodic_mask(self):
        if self.system is not None:
            return self.system.model.periodic_mask
        return self.flow_model.periodic_mask

    def sample(self, n: int, seed: int = 0) -> np.ndarray:
        return self.sampler(np.random.default_rng(seed), n)

    def expected(self):
        """The expected-results table as ``(check_id, target, tol)`` triples."""
        return [(c.id, c.target, c.tol) for c in self.checks]

    def memo(self, key, fn):
        """Compute ``fn()`` once per key (shared by checks that reuse a result)."""
        with self._lock:
            if key not in self._memo:
                self._memo[key] = fn()
            return self._memo[key]


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    doc: str
    params: dict
    builder: Callable


REGISTRY: dict = {}


def _register(name, doc, params):
    def deco(fn):
        REGISTRY[name] = ScenarioSpec(name, doc, params, fn)
        return fn

    return deco


def names():
    return list(REGISTRY)


def _resolve_params(spec: ScenarioSpec, params: dict) -> dict:
    out = {}
    for key in params:
        if key not in spec.params:
            raise ConfigError(f"params.{key}", f"unknown parameter for scenario {spec.name!r}")
    for key, ps in spec.params.items():
        raw = params.get(key, ps.default)
        out[key] = ps.coerce(f"params.{key}", raw)
    for key, ps in spec.params.items():
        if ps.valid is not None and not ps.valid(out[key], out):
            raise ConfigError(f"params.{key}", f"out of range: {ps.range_doc}")
    return out


def build(name: str, params: Optional[dict] = None, options: IntegratorOptions = DEFAULT_OPTIONS,
          expected=()) -> Scenario:
    """Build a registered scenario.

    Raises :class:`ConfigError` for an unknown name, an unknown parameter
    or a parameter outside its documented range.
    """
    if name not in REGISTRY:
        raise ConfigError("name", f"unknown scenario {name!r}; known: {', '.join(REGISTRY)}")
    spec = REGISTRY[name]
    resolved = _resolve_params(spec, params or {})
    sc = spec.builder(resolved, options)
    sc.description = spec.doc
    if expected:
        by_id = {c.id: c for c in sc.checks}
        for cid, target, tol in expected:
            if cid not in by_id:
                raise ConfigError(f"expected.{cid}", f"unknown check for scenario {name!r}")
            by_id[cid] = replace(by_id[cid], target=target, tol=float(tol))
        sc.checks = tuple(by_id[c.id] for c in sc.checks)
    return sc


def build_from_config(cfg: ScenarioConfig) -> Scenario:
    return build(cfg.name, cfg.params, cfg.integrator, cfg.expected)


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VerifyReport:
    scenario: str
    params: dict
    results: tuple
    seed: int

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def to_dict(self) -> dict:
        return {"scenario": self.scenario, "params": self.params, "seed": self.seed,
                "passed": self.passed, "checks": [r.to_dict() for r in self.results]}


def _deviation(measured, target) -> float:
    m = np.asarray(measured, dtype=float)
    t = np.asarray(target, dtype=float)
    if m.shape != t.shape and t.ndim and m.ndim:
        return math.inf
    dev = np.abs(m - t)
    if not np.all(np.isfinite(dev)):
        return math.inf
    return float(np.max(dev)) if dev.size else 0.0


def _check_rng(seed: int, check_id: str):
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(check_id.encode())]))


def verify(sc: Scenario, seed: int = 0, threads: int = 1, only=None) -> VerifyReport:
    """Run the scenario's checks; failures are reported, never raised.

    Each check draws from its own generator seeded by ``seed`` and the check
    id, so results do not depend on ``threads`` or on which checks run.
    """
    checks = [c for c in sc.checks if only is None or c.id in only]

    def run(c: Check):
        measured = c.run(sc, _check_rng(seed, c.id))
        if isinstance(measured, np.ndarray):
            measured = measured.tolist()
        elif isinstance(measured, (np.floating, np.integer)):
            measured = measured.item()
        dev = _deviation(measured, c.target)
        return CheckResult(c.id, bool(dev <= c.tol), measured, c.target, c.tol, dev)

    if threads > 1 and len(checks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, checks))
    else:
        results = [run(c) for c in checks]
    return VerifyReport(sc.name, dict(sc.params), tuple(results), int(seed))


# ---------------------------------------------------------------------------
# shared measurements
# ---------------------------------------------------------------------------


def conformal_residuals(sys, points, T: float, opts: IntegratorOptions = DEFAULT_OPTIONS,
                        n_out: int = 41, max_step: float = 0.01):
    """Largest residuals of the conformal identities along orbits.

    Returns ``(scalar, tangent, volume)``:

    * ``max |H(x_t) - e^{r_t} H(x_0)| / (1 + |H(x_0)|)``;
    * ``max ||V^T W(x_t) V - e^{r_t} W(x_0)||_F / ||W(x_0)||_F``;
    * ``max |det V - e^{n r_t}| / e^{n r_t}``.

    The step is capped at ``max_step`` so that tangent entries decaying
    below ``atol`` are still resolved in relative terms.
    """
    opts = replace(opts, tangent=True, max_step=min(opts.max_step, max_step), stop_on_exit=False)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    b = integrate_many(sys, points, T, opts, np.linspace(0.0, T, n_out), threads=1)
    H0 = sys.H(points)
    er = np.exp(b.r)
    scalar = float(np.max(np.abs(sys.H(b.x) - er * H0) / (1.0 + np.abs(H0))))
    W0 = sys.model.omega(points)
    Wt = sys.model.omega(b.x)
    VtWV = np.swapaxes(b.V, -1, -2) @ Wt @ b.V
    tangent = float(np.max(np.linalg.norm(VtWV - er[..., None, None] * W0, axis=(-2, -1))
                           / np.linalg.norm(W0, axis=(-2, -1))))
    n = sys.dim // 2
    enr = np.exp(n * b.r)
    volume = float(np.max(np.abs(np.linalg.det(b.V) - enr) / enr))
    return scalar, tangent, volume


def off_band(y, eps: float, centers=(0.0, 0.5)):
    """True where the angle ``y`` is farther than ``eps`` from every centre (mod 1)."""
    y = np.asarray(y, dtype=float)
    ok = np.ones(y.shape, dtype=bool)
    for c in centers:
        ok &= np.abs(y - c - np.round(y - c)) > eps
    return ok


def dichotomy_grid(sc: Scenario, n: int, T: float, eps: float = 0.05, tail: float = 0.1,
                   threads: Optional[int] = None, recurrence: bool = True):
    """Classify an ``n x n`` grid of the sin scenario and measure recurrence.

    Returns a dict with the cells off both invariant circles (band ``eps``),
    their labels, ``r_final``, tail ``max |H|`` and recurrence distances.
    """
    sys = sc.system
    grid = replace(sc.grid, n=(n, n))
    _, pts = grid.points()
    keep = off_band(pts[:, 1], eps)
    pts = pts[keep]
    b = integrate_many(sys, pts, T, sc.options, np.linspace(0.0, T, 401), threads=threads)
    labels = classify_samples(b.t, b.r)
    tail_idx = b.t >= (1.0 - tail) * T
    tail_h = np.max(np.abs(sys.H(b.x[tail_idx])), axis=0)
    out = {
        "points": pts,
        "labels": [c.label for c in labels],
        "r_final": b.r[-1],
        "tail_max_H": tail_h,
    }
    if recurrence:
        out["recurrence_distance"] = recurrence_distances(sys, pts, T, opts=sc.options)
    return out


def _dissipative_fraction(d):
    ok = [(lab == Label.DISSIPATIVE_PLUS and rf < -20 and h < 1e-4)
          for lab, rf, h in zip(d["labels"], d["r_final"], d["tail_max_H"])]
    return float(np.mean(ok))


def _random_torus(rng, n, d):
    return rng.random((n, d))


def _max_closure(model, points):
    return max(d_eta_closure_check(model, p) / closure_tolerance(model, p) for p in points)


def _group_law(model, points, rng):
    worst = 0.0
    for z in points:
        s, t = rng.uniform(-3, 3, size=2)
        gap = model.difference(model.flow(model.flow(z, s), t), model.flow(z, s + t))
        worst = max(worst, float(np.max(np.abs(gap))))
    return worst


# ---------------------------------------------------------------------------
# sin2d
# ---------------------------------------------------------------------------


def _sin_system():
    model = flat_torus(1, (1.0, 0.0))

    def H(x):
        return np.sin(TAU * np.asarray(x)[..., 1])

    def gradH(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        out[..., 1] = TAU * np.cos(TAU * x[..., 1])
        return out

    def jac(x):
        x = np.asarray(x, dtype=float)
        y = x[..., 1]
        out = np.zeros(x.shape + (2,))
        out[..., 0, 1] = -TAU * TAU * np.sin(TAU * y)
        out[..., 1, 1] = TAU * np.cos(TAU * y)
        return out

    return HamiltonianSystem(model, H, "sin2d", gradH, jac)


def sin_closed_form(x0, t):
    """Exact orbit of the sin example for ``0 < y0 < 1/2``: ``tan(pi y) = tan(pi y0) e^{2 pi t}``.

    Returns ``(x, y, r)``; ``r`` equals the displacement of ``x``.
    """
    x0, y0 = float(x0[0]), float(x0[1])
    u0 = math.tan(math.pi * y0)
    u = u0 * math.exp(TAU * t)
    y = math.atan(u) / math.pi
    r = math.log(u / (1 + u * u)) - math.log(u0 / (1 + u0 * u0))
    return x0 + r, y, r


@_register("sin2d", "H = sin(2 pi y) on the torus with eta = dx, omega = dx^dy; attractor y = 1/2, repeller y = 0", {})
def _build_sin(params, options):
    sys = _sin_system()
    eps = 0.05

    def dist_attr(x):
        x = np.asarray(x, dtype=float)
        return np.abs(torus_difference(x[..., 1], 0.5, True))

    def sampler(rng, n):
        out = []
        while len(out) < n:
            p = rng.random(2)
            if off_band(p[1], eps):
                out.append(p)
        return np.array(out)

    def field_check(sc, rng):
        x = rng.random((50, 2))
        exact = np.stack([TAU * np.cos(TAU * x[:, 1]), np.sin(TAU * x[:, 1])], axis=-1)
        return float(np.max(np.abs(sc.system.field(x) - exact)))

    def identities(sc, rng):
        return sc.memo("identities", lambda: conformal_residuals(sc.system, sc.sample(20, int(rng.integers(2**31))), 20.0, sc.options))

    def endpoint(sc, rng):
        tr = integrate(sc.system, [0.0, 0.25], 5.0, sc.options)
        x, y, r = sin_closed_form([0.0, 0.25], 5.0)
        return max(abs(tr.x[-1, 1] - y), abs(tr.r[-1] - r), abs(tr.x[-1, 0] - x))

    def dichotomy(sc, rng):
        return sc.memo("dichotomy", lambda: dichotomy_grid(sc, 16, 40.0, eps, threads=1))

    def lyap(sc, rng):
        return sc.memo("lyapunov", lambda: lyapunov_spectrum(sc.system, [0.0, 0.5], 200.0, 0.5, sc.options))

    def basin(sc, rng):
        cells = basin_map(sc.system, replace(sc.grid, n=(16, 16)), sc.attractors, 40.0, sc.options, threads=1)
        ok = [c.label == "circle_y_half" and c.r_final < 0 for c in cells if off_band(c.x0[1], eps, (0.0,))]
        return float(np.mean(ok))

    def return_time(sc, rng):
        c, d, direction = sc.sections["x=0"]
        return poincare_return(sc.system, [0.0, 0.5], (c, d), direction, sc.options).time

    def mono(sc, rng):
        point, period = sc.periodic_orbits["attractor"]
        M = monodromy(sc.system, point, period, sc.options)
        return np.sort(np.linalg.eigvals(M).real)

    def leaf(sc, rng):
        seeds = rng.random((5, 2))
        return max(leaf_trace(sc.system, s, 2.0).residual for s in seeds)

    checks = (
        Check("field_closed_form", "X = (2 pi cos 2 pi y, sin 2 pi y)", 0.0, 1e-12, field_check),
        Check("scalar_identity", "H(x_t) = e^{r_t} H(x_0), 20 orbits, T = 20", 0.0, 1e-6, lambda sc, g: identities(sc, g)[0]),
        Check("tangent_conformality", "V^T W V = e^r W, relative Frobenius", 0.0, 1e-5, lambda sc, g: identities(sc, g)[1]),
        Check("volume_scaling", "det V = e^{r}, relative", 0.0, 1e-6, lambda sc, g: identities(sc, g)[2]),
        Check("endpoint_closed_form", "orbit of (0, 1/4) at t = 5 against tan(pi y) = e^{2 pi t}", 0.0, 1e-6, endpoint),
        Check("dissipative_fraction", "16x16 grid off both circles: DissipativePlus, r_T < -20, tail |H| < 1e-4", 1.0, 0.01,
              lambda sc, g: _dissipative_fraction(dichotomy(sc, g))),
        Check("recurrence_fraction", "same cells, eps = 0.05 over [T/4, T]", 0.0, 0.0,
              lambda sc, g: float(np.mean(dichotomy(sc, g)["recurrence_distance"] <= eps))),
        Check("forward_backward_agreement", "64 samples off both circles, T = 40", 1.0, 0.01,
              lambda sc, g: forward_backward_agreement(sc.system, sc.sample(64, int(g.integers(2**31))), 40.0, sc.options, threads=1)),
        Check("attractor_capture", "16x16 grid off the repeller ends within 1e-3 of y = 1/2 with r_T < 0", 1.0, 0.01, basin),
        Check("return_time", "first return to x = 0 on the attractor", 1.0 / TAU, 1e-9, return_time),
        Check("monodromy_multipliers", "Floquet multipliers of the attracting circle", [math.exp(-1.0), 1.0], 1e-6, mono),
        Check("lyapunov_exponents", "attractor orbit, T = 200", [-TAU, 0.0], 1e-2, lambda sc, g: lyap(sc, g).exponents),
        Check("lyapunov_symmetry", "lambda_1 + lambda_2 - rbar", [0.0], 1e-2, lambda sc, g: lyap(sc, g).residuals),
        Check("mean_winding", "rbar on the attractor", -TAU, 1e-3, lambda sc, g: lyap(sc, g).r_bar),
        Check("leaf_identity", "H(g(s)) = e^{int eta} H(g(0)) on 5 leaves of arclength 2", 0.0, 1e-8, leaf),
        Check("structure_closure", "closure residual / tolerance at 20 points", 0.0, 1.0,
              lambda sc, g: _max_closure(sc.system.model, g.random((20, 2)))),
    )
    return Scenario(
        "sin2d", params, options, system=sys,
        attractors=(Attractor("circle_y_half", dist_attr, 1e-3),),
        sections={"x=0": ((1.0, 0.0), 0.0, -1)},
        periodic_orbits={"attractor": (np.array([0.0, 0.5]), 1.0 / TAU)},
        default_x0=np.array([0.1, 0.3]), horizon=40.0,
        grid=GridSpec(axes=(0, 1), n=(64, 64), lo=(0.0, 0.0), hi=(1.0, 1.0), base=(0.0, 0.0)),
        sampler=sampler, checks=checks,
    )


# ---------------------------------------------------------------------------
# lee2d
# ---------------------------------------------------------------------------


def _lee_system(a, b):
    model = flat_torus(1, (a, b))

    def H(x):
        return np.ones(np.shape(x)[:-1])

    def zero(x):
        return np.zeros(np.shape(x))

    def jac(x):
        return np.zeros(np.shape(x) + (2,))

    return HamiltonianSystem(model, H, "lee2d", zero, jac)


@_register("lee2d", "H = 1 on the torus with eta = a dx + b dy: the Lee flow X = (-b, a)", {
    "a": ParamSpec("real", 1.0, "coefficient of dx in eta"),
    "b": ParamSpec("real", math.sqrt(2.0), "coefficient of dy in eta"),
})
def _build_lee(params, options):
    a, b = params["a"], params["b"]
    sys = _lee_system(a, b)
    expected_field = [-b, a]

    def sampler(rng, n):
        return rng.random((n, 2))

    def field_check(sc, rng):
        return float(np.max(np.abs(sc.system.field(rng.random((20, 2))) - expected_field)))

    def eta_x(sc, rng):
        x = rng.random((20, 2))
        return float(np.max(np.abs(np.sum(sc.system.model.eta(x) * sc.system.field(x), axis=-1))))

    def endpoint(sc, rng):
        x0 = np.array([0.3, 0.7])
        tr = integrate(sc.system, x0, 10.0, sc.options)
        gap = torus_difference(tr.x[-1], x0 + 10.0 * np.array(expected_field), True)
        return max(float(np.max(np.abs(gap))), abs(float(tr.r[-1])))

    def identities(sc, rng):
        return sc.memo("identities", lambda: conformal_residuals(sc.system, sc.sample(20, int(rng.integers(2**31))), 20.0, sc.options))

    def conservative(sc, rng):
        pts = sc.sample(50, int(rng.integers(2**31)))
        bt = integrate_many(sc.system, pts, 100.0, sc.options, np.linspace(0, 100.0, 201), threads=1)
        return float(np.mean([c.label == Label.CONSERVATIVE_PLUS for c in classify_samples(bt.t, bt.r)]))

    def recurrence(sc, rng):
        pts = sc.sample(50, int(rng.integers(2**31)))
        return float(np.mean(recurrence_distances(sc.system, pts, 1000.0, opts=sc.options) <= 0.05))

    def cycle(sc, rng):
        return sc.memo("cycle", lambda: asymptotic_cycle(integrate(sc.system, [0.2, 0.4], 1000.0, sc.options),
                                                         [(1.0, 0.0), (0.0, 1.0)]))

    def lyap(sc, rng):
        return lyapunov_spectrum(sc.system, [0.2, 0.4], 50.0, 0.5, sc.options).exponents

    def leaf(sc, rng):
        return max(leaf_trace(sc.system, s, 2.0).residual for s in rng.random((3, 2)))

    checks = (
        Check("field_closed_form", "X = (-b, a)", 0.0, 1e-12, field_check),
        Check("lee_eta_X", "eta(X) = 0", 0.0, 1e-12, eta_x),
        Check("endpoint_closed_form", "(x - b t, y + a t) mod 1 and r = 0 at t = 10", 0.0, 1e-9, endpoint),
        Check("scalar_identity", "H(x_t) = e^{r_t} H(x_0), 20 orbits, T = 20", 0.0, 1e-6, lambda sc, g: identities(sc, g)[0]),
        Check("tangent_conformality", "V^T W V = e^r W", 0.0, 1e-5, lambda sc, g: identities(sc, g)[1]),
        Check("volume_scaling", "det V = e^{r}", 0.0, 1e-6, lambda sc, g: identities(sc, g)[2]),
        Check("conservative_fraction", "50 samples, T = 100", 1.0, 0.0, conservative),
        Check("recurrence_fraction", "50 samples, eps = 0.05, T = 1000", 1.0, 0.0, recurrence),
        Check("asymptotic_cycle", "Birkhoff averages of dx, dy over T = 1000", expected_field, 1e-3, cycle),
        Check("cycle_pairing", "<[eta], A>", 0.0, 1e-6, lambda sc, g: float(np.dot([a, b], cycle(sc, g)))),
        Check("lyapunov_exponents", "rigid translation", [0.0, 0.0], 1e-8, lyap),
        Check("leaf_identity", "leaves of ker eta keep H = 1", 0.0, 1e-8, leaf),
    )
    return Scenario(
        "lee2d", params, options, system=sys,
        sections={"x=0": ((1.0, 0.0), 0.0, 1 if -b >= 0 else -1)},
        default_x0=np.array([0.3, 0.26]), horizon=100.0,
        grid=GridSpec(axes=(0, 1), n=(32, 32)),
        sampler=sampler, checks=checks,
    )


# ---------------------------------------------------------------------------
# twisted symplectization of the unit cotangent bundle of T^n
# ---------------------------------------------------------------------------


def _a_valid(a, p):
    return len(a) == p["n"]


def _random_unit_bundle(rng, n, count, theta=True):
    x = rng.random((count, n))
    v = rng.standard_normal((count, n))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    parts = [x, v] + ([rng.random((count, 1))] if theta else [])
    return np.concatenate(parts, axis=1)


@_register("lee_twisted", "Lee flow on the twisted symplectization of T^1 T^n with beta = sum a_i dq_i", {
    "n": ParamSpec("int", 2, "torus dimension", lambda v, p: 1 <= v <= 3, "1 <= n <= 3"),
    "a": ParamSpec("vector", [math.sqrt(2.0), math.sqrt(3.0)], "coefficients of beta", _a_valid, "length n"),
})
def _build_lee_twisted(params, options):
    n, a = params["n"], np.array(params["a"])
    model = twisted_symplectization_unit_torus(n, a)
    contact = unit_torus_bundle_contact_system(n, a=a)
    bounds = (50.0, 20)

    def sampler(rng, count):
        return _random_unit_bundle(rng, n, count)

    def search(sc, rng):
        return sc.memo("search", lambda: (lee_periodic_orbit_search(n, a, *bounds),
                                          lee_periodic_orbit_enumeration(n, a, *bounds)))

    def matches(sc, rng):
        found, oracle = search(sc, rng)
        same = [c.w for c in found] == [c.w for c in oracle] and all(
            abs(c.tau - o.tau) <= 1e-9 for c, o in zip(found, oracle))
        return 1.0 if same else 0.0

    def closes(sc, rng):
        found, _ = search(sc, rng)
        worst = 0.0
        for c in found[:20]:
            z = np.concatenate([np.zeros(n), c.v, [0.0]])
            worst = max(worst, float(np.max(np.abs(model.difference(model.flow(z, c.tau), z)))))
        return worst

    def lift(sc, rng):
        worst = 0.0
        for z in _random_unit_bundle(rng, n, 10, theta=False):
            got = symplectization_lift_field(contact, z)
            v = z[n:]
            want = np.concatenate([v, np.zeros(n), [float(a @ v)]])
            worst = max(worst, float(np.max(np.abs(got - want))))
        return worst

    def winding(sc, rng):
        pts = sampler(rng, 20)
        return float(max(abs(model.winding(z, t)) for z, t in zip(pts, rng.uniform(-10, 10, 20))))

    oracle = lee_periodic_orbit_enumeration(n, a, *bounds)
    checks = (
        Check("periodic_search_matches_enumeration", "search equals lattice enumeration (tau <= 50, entries <= 20)", 1.0, 0.0, matches),
        Check("periodic_orbit_count", "number of periodic directions found", float(len(oracle)), 0.0,
              lambda sc, g: float(len(search(sc, g)[0]))),
        Check("periodic_orbits_close", "found orbits return to their start", 0.0, 1e-9, closes),
        Check("lee_lift_field", "lifted Reeb field equals (v, 0, a.v)", 0.0, 1e-9, lift),
        Check("group_law", "flow(flow(z, s), t) = flow(z, s + t)", 0.0, 1e-10, lambda sc, g: _group_law(model, sc.sampler(g, 20), g)),
        Check("winding_zero", "r_t = 0", 0.0, 0.0, winding),
    )
    return Scenario(
        "lee_twisted", {"n": n, "a": a.tolist()}, options, flow_model=model, contact=contact,
        default_x0=np.concatenate([np.zeros(n), np.eye(n)[0], [0.0]]), horizon=100.0,
        sampler=sampler, checks=checks,
    )


@_register("nonexact_conservative", "H = p_1 on the symplectization of T^1 T^n: conservative with eta non-exact on {H = 0}", {
    "n": ParamSpec("int", 2, "torus dimension", lambda v, p: 1 <= v <= 6, "1 <= n <= 6"),
})
def _build_nonexact(params, options):
    n = params["n"]
    model = nonexact_conservative_model(n)

    def H(z):
        return np.asarray(z, dtype=float)[..., n]

    def gradH(z):
        z = np.asarray(z, dtype=float)
        out = np.zeros(z.shape)
        out[..., n] = 1.0
        return out

    contact = unit_torus_bundle_contact_system(n, H=H, gradH=gradH)

    def sampler(rng, count):
        return _random_unit_bundle(rng, n, count)

    def lift(sc, rng):
        want = np.zeros(2 * n + 1)
        want[0] = 1.0
        return max(float(np.max(np.abs(symplectization_lift_field(contact, z) - want)))
                   for z in _random_unit_bundle(rng, n, 10, theta=False))

    def h_invariant(sc, rng):
        pts = sampler(rng, 20)
        return max(abs(float(model.H(model.flow(z, t)) - model.H(z))) for z, t in zip(pts, rng.uniform(-10, 10, 20)))

    def conservative(sc, rng):
        times = np.linspace(0.0, 100.0, 201)
        labels = []
        for z in sampler(rng, 20):
            tr = sample_analytic(model, z, times)
            labels.append(classify_samples(tr.t, tr.r[:, None])[0].label)
        return float(np.mean([lab == Label.CONSERVATIVE_PLUS for lab in labels]))

    def winding(sc, rng):
        pts = sampler(rng, 20)
        return float(max(abs(model.winding(z, t)) for z, t in zip(pts, rng.uniform(-10, 10, 20))))

    checks = (
        Check("lifted_field", "conformal field is (1, 0, ..., 0)", 0.0, 1e-9, lift),
        Check("H_invariant", "H = p_1 constant along the flow", 0.0, 1e-12, h_invariant),
        Check("winding_zero", "r_t = 0", 0.0, 0.0, winding),
        Check("conservative_fraction", "20 samples, T = 100", 1.0, 0.0, conservative),
        Check("group_law", "flow(flow(z, s), t) = flow(z, s + t)", 0.0, 1e-10, lambda sc, g: _group_law(model, sc.sampler(g, 20), g)),
    )
    return Scenario(
        "nonexact_conservative", params, options, flow_model=model, contact=contact,
        default_x0=np.concatenate([np.zeros(n), np.eye(n)[0], [0.0]]), horizon=100.0,
        sampler=sampler, checks=checks,
    )


# ---------------------------------------------------------------------------
# contact sphere
# ---------------------------------------------------------------------------


@_register("sphere_legendrian", "normalised hyperbolic rotation on S^{2n-1}: Legendrian attractor {x = y}", {
    "n": ParamSpec("int", 2, "half the ambient dimension", lambda v, p: 2 <= v <= 6, "2 <= n <= 6"),
})
def _build_sphere(params, options):
    n = params["n"]
    model = contact_sphere_model(n)
    contact = sphere_contact_system(n)
    system = ContactFlowSystem(contact, "sphere_legendrian")
    dplus, dminus = model.sets["L+"], model.sets["L-"]

    def sampler(rng, count, margin=0.1):
        out = []
        while len(out) < count:
            z = rng.standard_normal(2 * n)
            z /= np.linalg.norm(z)
            if dminus(z) >= margin:
                out.append(z)
        return np.array(out)

    def capture(sc, rng):
        return max(float(dplus(model.flow(z, 10.0))) for z in sampler(rng, 100))

    def invariance(sc, rng):
        worst = 0.0
        for x in rng.standard_normal((20, n)):
            z = np.concatenate([x, x]) / (math.sqrt(2.0) * np.linalg.norm(x))
            for t in (-5.0, 1.0, 5.0, 10.0):
                worst = max(worst, float(dplus(model.flow(z, t))))
        return worst

    def field_vs_flow(sc, rng):
        worst = 0.0
        for z in sampler(rng, 3):
            tr = integrate(system, z, 2.0, replace(sc.options, rtol=1e-10, atol=1e-12))
            worst = max(worst, float(np.max(np.abs(tr.x[-1] - model.flow(z, 2.0)))),
                        abs(float(tr.r[-1] - model.winding(z, 2.0))))
        return worst

    def reeb(sc, rng):
        pts = sampler(rng, 10, 0.0)
        return max(abs(float(contact.alpha(z) @ reeb_field(contact, z)) - 1.0) for z in pts)

    checks = (
        Check("legendrian_capture", "100 points off L- by 0.1: distance to L+ after T = 10", 0.0, 1e-4, capture),
        Check("legendrian_invariance", "L+ is invariant", 0.0, 1e-10, invariance),
        Check("contact_field_matches_flow", "integrated contact field against the closed form, T = 2", 0.0, 1e-8, field_vs_flow),
        Check("reeb_normalisation", "alpha(R) = 1", 0.0, 1e-12, reeb),
        Check("group_law", "flow(flow(z, s), t) = flow(z, s + t)", 0.0, 1e-10, lambda sc, g: _group_law(model, sc.sampler(g, 20), g)),
    )
    x0 = np.zeros(2 * n)
    x0[0] = 1.0
    return Scenario(
        "sphere_legendrian", params, options, system=system, flow_model=model, contact=contact,
        attractors=(Attractor("L+", dplus, 1e-4),),
        default_x0=x0, horizon=10.0, sampler=sampler, checks=checks,
    )


# ---------------------------------------------------------------------------
# hyperbolic attracting periodic orbit in a twisted cotangent bundle
# ---------------------------------------------------------------------------


def _cotangent_system(kappa, r, p_bound):
    model = conformal_cotangent_torus(2, (r, 0.0), p_bound)

    def H(x):
        x = np.asarray(x, dtype=float)
        return x[..., 2] - kappa * np.sin(TAU * x[..., 1]) * x[..., 3]

    def gradH(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        out[..., 1] = -TAU * kappa * np.cos(TAU * x[..., 1]) * x[..., 3]
        out[..., 2] = 1.0
        out[..., 3] = -kappa * np.sin(TAU * x[..., 1])
        return out

    def jac(x):
        x = np.asarray(x, dtype=float)
        s, c = np.sin(TAU * x[..., 1]), np.cos(TAU * x[..., 1])
        out = np.zeros(x.shape + (4,))
        out[..., 1, 1] = -TAU * kappa * c
        out[..., 2, 2] = r
        out[..., 3, 1] = -TAU * TAU * kappa * s * x[..., 3]
        out[..., 3, 3] = r + TAU * kappa * c
        return out

    return HamiltonianSystem(model, H, "cotangent_attractor", gradH, jac)


def cotangent_base_flow(kappa):
    """Closed-form base flow ``q1 -> q1 + t``, ``tan(pi q2) -> tan(pi q2) e^{-2 pi kappa t}`` and its Jacobian."""

    def flow(q, t):
        q = np.asarray(q, dtype=float)
        k = np.round(q[1])
        u = math.tan(math.pi * (q[1] - k)) * math.exp(-TAU * kappa * t)
        return np.array([q[0] + t, k + math.atan(u) / math.pi])

    def jacobian(q, t):
        q = np.asarray(q, dtype=float)
        u0 = math.tan(math.pi * (q[1] - np.round(q[1])))
        g = math.exp(-TAU * kappa * t)
        u = u0 * g
        return np.diag([1.0, g * (1 + u0 * u0) / (1 + u * u)])

    return flow, jacobian


def _cotangent_valid(v, p):
    return p["kappa"] > 0 and p["r"] < -TAU * p["kappa"]


@_register("cotangent_attractor", "lift of q1' = 1, q2' = -kappa sin(2 pi q2) to T*T^2 twisted by beta = r dq1", {
    "kappa": ParamSpec("real", 0.1, "contraction rate of the base circle", _cotangent_valid,
                       "kappa > 0 and e^r < e^{-2 pi kappa} < 1"),
    "r": ParamSpec("real", -1.0, "coefficient of beta", _cotangent_valid, "e^r < e^{-2 pi kappa} < 1"),
    "p_bound": ParamSpec("real", 0.5, "fibre half-width of the chart", lambda v, p: v > 0, "p_bound > 0"),
})
def _build_cotangent(params, options):
    kappa, r, pb = params["kappa"], params["r"], params["p_bound"]
    sys = _cotangent_system(kappa, r, pb)
    mu = math.exp(-TAU * kappa)
    options = replace(options, stop_on_exit=False)

    def dist_orbit(x):
        x = np.asarray(x, dtype=float)
        dq = torus_difference(x[..., 1], 0.0, True)
        return np.sqrt(dq * dq + x[..., 2] ** 2 + x[..., 3] ** 2)

    def sampler(rng, n, margin=1e-3):
        out = []
        half = min(0.25, pb / 2)
        while len(out) < n:
            z = np.concatenate([rng.random(2), rng.uniform(-half, half, 2)])
            if abs(sys.H(z)) > margin:
                out.append(z)
        return np.array(out)

    def field_check(sc, rng):
        x = sampler(rng, 20)
        s, c = np.sin(TAU * x[:, 1]), np.cos(TAU * x[:, 1])
        exact = np.stack([np.ones(len(x)), -kappa * s, r * x[:, 2], (r + TAU * kappa * c) * x[:, 3]], axis=-1)
        return float(np.max(np.abs(sc.system.field(x) - exact)))

    def lift(sc, rng):
        flow, jac = cotangent_base_flow(kappa)
        worst = 0.0
        for z in sampler(rng, 3):
            tr = integrate(sc.system, z, 1.0, sc.options)
            want = cotangent_lift_flow(flow, jac, (r, 0.0), z, 1.0)
            worst = max(worst, float(np.max(np.abs(tr.x[-1] - want))))
        return worst

    def identities(sc, rng):
        return sc.memo("identities", lambda: conformal_residuals(sc.system, sc.sample(20, int(rng.integers(2**31))), 20.0, sc.options))

    def mono(sc, rng):
        point, period = sc.periodic_orbits["gamma"]
        return np.sort(np.linalg.eigvals(monodromy(sc.system, point, period, sc.options)).real)

    def ret(sc, rng):
        c, d, direction = sc.sections["q1=0"]
        J, _ = return_map_jacobian(sc.system, np.zeros(4), (c, d), direction, sc.options, t_min=0.5)
        return np.sort(np.linalg.eigvals(J).real)

    def lyap(sc, rng):
        return sc.memo("lyapunov", lambda: lyapunov_spectrum(sc.system, np.zeros(4), 200.0, 0.5, sc.options))

    def basin(sc, rng):
        cells = basin_map(sc.system, replace(sc.grid, n=(16, 16)), sc.attractors, 40.0, sc.options, threads=1)
        ok = [c.label == "periodic_orbit" for c in cells if off_band(c.x0[1], 0.05, (0.5,))]
        return float(np.mean(ok))

    def dissipative(sc, rng):
        pts = sc.sample(64, int(rng.integers(2**31)))
        bt = integrate_many(sc.system, pts, 40.0, sc.options, np.linspace(0, 40.0, 401), threads=1)
        return float(np.mean([c.label == Label.DISSIPATIVE_PLUS for c in classify_samples(bt.t, bt.r)]))

    def closure(sc, rng):
        pts = sampler(rng, 20)
        return _max_closure(sc.system.model, pts)

    floquet = sorted([1.0, mu, math.exp(r), math.exp(r) / mu])
    exps = sorted([0.0, -TAU * kappa, r, r + TAU * kappa])
    checks = (
        Check("field_closed_form", "X = (1, -k s, r p1, (r + 2 pi k c) p2)", 0.0, 1e-12, field_check),
        Check("cotangent_lift", "integrated field against the lifted base flow at t = 1", 0.0, 1e-7, lift),
        Check("scalar_identity", "H(x_t) = e^{r_t} H(x_0), 20 orbits, T = 20", 0.0, 1e-6, lambda sc, g: identities(sc, g)[0]),
        Check("tangent_conformality", "V^T W V = e^r W", 0.0, 1e-5, lambda sc, g: identities(sc, g)[1]),
        Check("volume_scaling", "det V = e^{2r}", 0.0, 1e-6, lambda sc, g: identities(sc, g)[2]),
        Check("monodromy_multipliers", "{1, mu, e^r, e^r / mu}", floquet, 1e-6, mono),
        Check("return_map_multipliers", "{mu, e^r, e^r / mu} on the section q1 = 0", sorted([mu, math.exp(r), math.exp(r) / mu]), 1e-3, ret),
        Check("lyapunov_exponents", "periodic orbit, T = 200", exps, 1e-2, lambda sc, g: lyap(sc, g).exponents),
        Check("lyapunov_symmetry", "pair sums minus rbar", [0.0, 0.0], 1e-2, lambda sc, g: lyap(sc, g).residuals),
        Check("mean_winding", "rbar = r", r, 1e-3, lambda sc, g: lyap(sc, g).r_bar),
        Check("attractor_capture", "16x16 (q2, p2) grid off the repelling circle captured by the orbit", 1.0, 0.01, basin),
        Check("dissipative_fraction", "64 samples, T = 40", 1.0, 0.0, dissipative),
        Check("forward_backward_agreement", "64 samples, T = 40", 1.0, 0.01,
              lambda sc, g: forward_backward_agreement(sc.system, sc.sample(64, int(g.integers(2**31))), 40.0, sc.options, threads=1)),
        Check("structure_closure", "closure residual / tolerance at 20 points", 0.0, 1.0, closure),
    )
    return Scenario(
        "cotangent_attractor", params, options, system=sys,
        attractors=(Attractor("periodic_orbit", dist_orbit, 1e-3),),
        sections={"q1=0": ((1.0, 0.0, 0.0, 0.0), 0.0, 1)},
        periodic_orbits={"gamma": (np.zeros(4), 1.0)},
        default_x0=np.array([0.0, 0.3, 0.1, -0.1]), horizon=40.0,
        grid=GridSpec(axes=(1, 3), n=(32, 32), lo=(0.0, -0.25), hi=(1.0, 0.25), base=(0.0, 0.0, 0.1, 0.0)),
        sampler=sampler, checks=checks,
    )
