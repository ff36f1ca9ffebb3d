"""Adaptive flow of the augmented system ``(x, r, V)``.

The state carries the point ``x``, the winding ``r`` (``r' = eta(X)``) and,
optionally, the tangent map ``V`` (``V' = DX(x) V``).  Steps come from the
Dormand-Prince 5(4) pair with its FSAL stage, a PI step-size controller and
the standard quartic continuous extension.  Several initial conditions can
be advanced together as a batch sharing one step sequence; the local error
of a step is the worst member's RMS error.

Angular coordinates are kept lifted during integration and only reduced when
written out.
"""

from __future__ import annotations

import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Optional

import numpy as np

from .geometry import torus_difference

__all__ = [
    "IntegratorOptions",
    "Trajectory",
    "BatchTrajectory",
    "StiffnessError",
    "ReturnTimeout",
    "NotPeriodicError",
    "ReturnHit",
    "integrate",
    "integrate_batch",
    "integrate_many",
    "poincare_return",
    "return_map_jacobian",
    "monodromy",
    "format_float",
    "default_threads",
    "sample_analytic",
]

# Dormand-Prince 5(4)
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
# PI controller exponents for an order-5 pair
_ALPHA = 0.7 / 5
_BETA = 0.4 / 5


class StiffnessError(RuntimeError):
    """Step size underflow; ``t`` and ``state`` hold the last accepted values."""

    def __init__(self, message, t, state):
        super().__init__(message)
        self.t = t
        self.state = state


class ReturnTimeout(RuntimeError):
    """No crossing of the section before the time limit."""


class NotPeriodicError(ValueError):
    """The supplied point does not close up after the supplied period."""


@dataclass(frozen=True)
class IntegratorOptions:
    """Integrator settings.

    ``jacobian_mode`` is ``"analytic"`` (use the system's closed-form
    Jacobian when it has one) or ``"central_fd"`` (always use central
    differences with step ``fd_step``).  ``stop_on_exit`` ends a
    trajectory when it leaves a bounded chart; the exit time is recorded
    either way.
    """

    rtol: float = 1e-9
    atol: float = 1e-9
    max_step: float = math.inf
    tangent: bool = False
    jacobian_mode: str = "analytic"
    fd_step: float = 1e-5
    first_step: Optional[float] = None
    stop_on_exit: bool = True
    max_steps: int = 10_000_000

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("rtol and atol must be positive")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")
        if self.jacobian_mode not in ("analytic", "central_fd"):
            raise ValueError(f"unknown jacobian_mode {self.jacobian_mode!r}")

    @classmethod
    def from_dict(cls, data: dict) -> "IntegratorOptions":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise KeyError(sorted(unknown)[0])
        data = dict(data)
        # JSON has no infinity; an unbounded step is written as null
        if data.get("max_step", 0.0) is None:
            data["max_step"] = math.inf
        return cls(**data)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def format_float(v) -> str:
    """Fixed 17-significant-digit text for a float."""
    return format(float(v), ".17g")


def default_threads() -> int:
    env = os.environ.get("CFLAB_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass
class Trajectory:
    """Time-stamped samples of one orbit.

    ``t`` is ordered along the direction of integration (decreasing for a
    backward flow).  ``x`` holds lifted coordinates, ``r`` the unwrapped
    winding and ``V`` the tangent maps when requested.  ``exit_time`` is the
    first time the orbit left a bounded chart, if it did.
    """

    t: np.ndarray
    x: np.ndarray
    r: np.ndarray
    V: Optional[np.ndarray] = None
    system: str = ""
    periodic_mask: Optional[np.ndarray] = None
    exit_time: Optional[float] = None

    def __len__(self):
        return len(self.t)

    @property
    def horizon(self) -> float:
        return float(self.t[-1] - self.t[0])

    @property
    def samples(self):
        Vs = self.V if self.V is not None else [None] * len(self.t)
        return list(zip(self.t, self.x, self.r, Vs))

    def reduced_x(self):
        x = np.array(self.x)
        if self.periodic_mask is not None:
            x[:, self.periodic_mask] = np.mod(x[:, self.periodic_mask], 1.0)
        return x

    def to_csv(self, path=None) -> str:
        """CSV text ``t,x_0..x_{d-1},r[,V_00..]``; written to ``path`` if given."""
        d = self.x.shape[1]
        cols = ["t"] + [f"x_{i}" for i in range(d)] + ["r"]
        if self.V is not None:
            cols += [f"V_{i}{j}" for i in range(d) for j in range(d)]
        buf = io.StringIO()
        buf.write(",".join(cols) + "\n")
        xs = self.reduced_x()
        for k in range(len(self.t)):
            row = [self.t[k], *xs[k], self.r[k]]
            if self.V is not None:
                row += list(self.V[k].ravel())
            buf.write(",".join(format_float(v) for v in row) + "\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


@dataclass
class BatchTrajectory:
    """Samples of many orbits on a common time grid: ``x[k, b]`` is orbit ``b`` at ``t[k]``."""

    t: np.ndarray
    x: np.ndarray
    r: np.ndarray
    V: Optional[np.ndarray] = None
    exit_time: np.ndarray = field(default_factory=lambda: np.array([]))
    system: str = ""
    periodic_mask: Optional[np.ndarray] = None

    def member(self, b: int) -> Trajectory:
        ex = self.exit_time[b]
        return Trajectory(
            self.t.copy(), self.x[:, b].copy(), self.r[:, b].copy(),
            None if self.V is None else self.V[:, b].copy(),
            self.system, self.periodic_mask, None if np.isnan(ex) else float(ex),
        )


# ---------------------------------------------------------------------------
# right-hand side
# ---------------------------------------------------------------------------


def _jacobian_fn(sys, opts: IntegratorOptions):
    if opts.jacobian_mode == "analytic" and getattr(sys, "jacobian", None) is not None:
        return sys.jacobian
    h = opts.fd_step

    def jac(x):
        d = x.shape[-1]
        cols = []
        for k in range(d):
            e = np.zeros(d)
            e[k] = h
            cols.append((sys.field(x + e) - sys.field(x - e)) / (2.0 * h))
        return np.stack(cols, axis=-1)

    return jac


def _make_rhs(sys, opts: IntegratorOptions, sign: float):
    d = sys.dim
    # systems without a Lee covector in chart form supply eta(X) directly
    rate = getattr(sys, "winding_rate", None)
    eta = None if rate is not None else sys.model.eta
    jac = _jacobian_fn(sys, opts) if opts.tangent else None

    def rhs(y):
        x = y[:, :d]
        X = sys.field(x)
        out = np.empty_like(y)
        out[:, :d] = X
        out[:, d] = rate(x) if eta is None else np.sum(eta(x) * X, axis=-1)
        if jac is not None:
            V = y[:, d + 1:].reshape(-1, d, d)
            out[:, d + 1:] = (jac(x) @ V).reshape(len(y), d * d)
        if sign != 1.0:
            out *= sign
        return out

    return rhs


def _initial_state(x0, d, tangent):
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    if x0.shape[1] != d:
        raise ValueError(f"expected points of dimension {d}, got {x0.shape[1]}")
    B = x0.shape[0]
    m = d + 1 + (d * d if tangent else 0)
    y = np.zeros((B, m))
    y[:, :d] = x0
    if tangent:
        y[:, d + 1:] = np.tile(np.eye(d).ravel(), (B, 1))
    return y


# ---------------------------------------------------------------------------
# stepper
# ---------------------------------------------------------------------------


def _rk_stages(f, y, f0, h):
    K = np.empty((7,) + y.shape)
    K[0] = f0
    for s in range(1, 6):
        dy = np.tensordot(_A[s], K[:s], axes=(0, 0)) * h
        K[s] = f(y + dy)
    y_new = y + h * np.tensordot(_B, K[:6], axes=(0, 0))
    K[6] = f(y_new)
    return y_new, K


def _err_norm(err, y, y_new, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
    per_member = np.sqrt(np.mean((err / scale) ** 2, axis=1))
    return float(np.max(per_member))


class _Stepper:
    """Dormand-Prince stepper over a batch; time runs forward in ``tau``."""

    def __init__(self, f, y0, opts: IntegratorOptions, t_bound: float):
        self.f = f
        self.y = y0
        self.tau = 0.0
        self.opts = opts
        self.t_bound = t_bound
        self.fy = f(y0)
        self.nfev = 1
        self.err_prev = 1e-4
        self.h = opts.first_step if opts.first_step else self._initial_step()
        self.h = min(self.h, opts.max_step)
        # filled after each accepted step
        self.tau_old = 0.0
        self.y_old = y0
        self.K = None
        self.h_used = 0.0

    def _initial_step(self):
        rtol, atol = self.opts.rtol, self.opts.atol
        y, f0 = self.y, self.fy
        scale = atol + np.abs(y) * rtol
        d0 = np.sqrt(np.mean((y / scale) ** 2))
        d1 = np.sqrt(np.mean((f0 / scale) ** 2))
        h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
        h0 = min(h0, self.t_bound) if self.t_bound > 0 else h0
        y1 = y + h0 * f0
        f1 = self.f(y1)
        self.nfev += 1
        d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
        if d1 <= 1e-15 and d2 <= 1e-15:
            h1 = max(1e-6, h0 * 1e-3)
        else:
            h1 = (0.01 / max(d1, d2)) ** (1 / 5)
        return min(100 * h0, h1)

    def step(self, tau_limit: float):
        """Take one accepted step, not beyond ``tau_limit``."""
        opts = self.opts
        h = min(self.h, opts.max_step, tau_limit - self.tau)
        rejected = False
        while True:
            if h < 10 * np.finfo(float).eps * max(1.0, abs(self.tau)):
                raise StiffnessError(
                    f"step size underflow at t={self.tau:.6g}", self.tau, self.y.copy()
                )
            y_new, K = _rk_stages(self.f, self.y, self.fy, h)
            self.nfev += 6
            err = h * np.tensordot(_E, K, axes=(0, 0))
            en = _err_norm(err, self.y, y_new, opts.rtol, opts.atol)
            if not np.isfinite(en):
                en = 1e10
            if en <= 1.0:
                if en == 0.0:
                    factor = _MAX_FACTOR
                else:
                    factor = _SAFETY * en ** (-_ALPHA) * self.err_prev ** _BETA
                    factor = min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
                if rejected:
                    factor = min(1.0, factor)
                self.err_prev = max(en, 1e-4)
                self.tau_old, self.y_old, self.K, self.h_used = self.tau, self.y, K, h
                self.tau = tau_limit if h == tau_limit - self.tau_old else self.tau_old + h
                self.y = y_new
                self.fy = K[6]
                self.h = h * factor
                return
            rejected = True
            h *= max(_MIN_FACTOR, _SAFETY * en ** (-1 / 5))

    def dense(self, theta):
        """States at fractions ``theta`` of the last step; shape ``(len(theta), B, m)``."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        powers = np.cumprod(np.repeat(theta[:, None], 4, axis=1), axis=1)  # (T, 4)
        Q = np.tensordot(self.K, _P, axes=(0, 0))  # (B, m, 4)
        return self.y_old[None] + self.h_used * np.einsum("bmk,tk->tbm", Q, powers)

    def substep(self, theta):
        """Fresh RK step of size ``theta * h`` from the start of the last step."""
        y, _ = _rk_stages(self.f, self.y_old, self.K[0], theta * self.h_used)
        return y


# ---------------------------------------------------------------------------
# drivers
# ---------------------------------------------------------------------------


def _unpack(y, d, tangent):
    x = y[..., :d]
    r = y[..., d]
    V = y[..., d + 1:].reshape(y.shape[:-1] + (d, d)) if tangent else None
    return x, r, V


def _outside(model, x):
    if getattr(model, "bounds", None) is None:
        return np.zeros(x.shape[:-1], dtype=bool)
    return ~model.inside(x)


def integrate(sys, x0, t_final: float, opts: IntegratorOptions = IntegratorOptions(), t_eval=None) -> Trajectory:
    """Flow ``x0`` for time ``t_final`` (negative for the backward flow).

    Samples are recorded at every accepted step, or at the times ``t_eval``
    (same sign as ``t_final``) through the continuous extension.  Leaving a
    bounded chart records ``exit_time``; with ``opts.stop_on_exit`` the
    trajectory ends at the first step outside the chart.

    Raises :class:`StiffnessError` on step-size underflow.
    """
    d = sys.dim
    y0 = _initial_state(x0, d, opts.tangent)
    mask = getattr(sys.model, "periodic_mask", None)
    if t_final == 0.0:
        x, r, V = _unpack(y0, d, opts.tangent)
        return Trajectory(np.zeros(1), x.copy(), r.copy(), None if V is None else V.copy(),
                          sys.name, mask)
    sign = 1.0 if t_final > 0 else -1.0
    T = abs(float(t_final))
    stepper = _Stepper(_make_rhs(sys, opts, sign), y0, opts, T)
    if t_eval is not None:
        taus = sign * np.asarray(t_eval, dtype=float)
        if np.any(taus < 0) or np.any(taus > T * (1 + 1e-12)) or np.any(np.diff(taus) < 0):
            raise ValueError("t_eval must be ordered and lie between 0 and t_final")
    rows = [y0[0]]
    times = [0.0]
    exit_time = None
    if t_eval is not None:
        rows, times = [], []
        k = 0
        while k < len(taus) and taus[k] <= 0.0:
            rows.append(y0[0])
            times.append(taus[k])
            k += 1
    steps = 0
    while stepper.tau < T:
        stepper.step(T)
        steps += 1
        if steps > opts.max_steps:
            raise StiffnessError("maximum number of steps exceeded", stepper.tau, stepper.y.copy())
        if t_eval is not None:
            j = k
            while j < len(taus) and taus[j] <= stepper.tau:
                j += 1
            if j > k:
                theta = (taus[k:j] - stepper.tau_old) / stepper.h_used
                ys = stepper.dense(theta)[:, 0]
                rows.extend(ys)
                times.extend(taus[k:j])
                k = j
        else:
            rows.append(stepper.y[0])
            times.append(stepper.tau)
        if exit_time is None and _outside(sys.model, stepper.y[:, :d])[0]:
            exit_time = sign * stepper.tau
            if opts.stop_on_exit:
                if t_eval is not None:
                    rows.append(stepper.y[0])
                    times.append(stepper.tau)
                break
    Y = np.array(rows)
    x, r, V = _unpack(Y, d, opts.tangent)
    return Trajectory(sign * np.asarray(times), x, r, V, sys.name, mask, exit_time)


def integrate_batch(sys, X0, t_final: float, opts: IntegratorOptions = IntegratorOptions(),
                    t_eval=None, on_step: Optional[Callable] = None) -> BatchTrajectory:
    """Flow a batch of points on a shared step sequence.

    Output is sampled at ``t_eval`` (default: 201 equally spaced times) via
    the continuous extension.  Orbits leaving a bounded chart get their exit
    time recorded and keep being integrated (the batch is never truncated).
    ``on_step(stepper, sign)`` is called after every accepted step.
    """
    d = sys.dim
    y0 = _initial_state(X0, d, opts.tangent)
    B = y0.shape[0]
    mask = getattr(sys.model, "periodic_mask", None)
    if t_eval is None:
        t_eval = np.linspace(0.0, t_final, 201)
    t_eval = np.asarray(t_eval, dtype=float)
    sign = 1.0 if t_final >= 0 else -1.0
    T = abs(float(t_final))
    taus = sign * t_eval
    out = np.empty((len(taus), B, y0.shape[1]))
    exit_time = np.full(B, np.nan)
    k = 0
    while k < len(taus) and taus[k] <= 0.0:
        out[k] = y0
        k += 1
    if T > 0:
        stepper = _Stepper(_make_rhs(sys, opts, sign), y0, opts, T)
        steps = 0
        while stepper.tau < T:
            stepper.step(T)
            steps += 1
            if steps > opts.max_steps:
                raise StiffnessError("maximum number of steps exceeded", stepper.tau, stepper.y.copy())
            j = k
            while j < len(taus) and taus[j] <= stepper.tau:
                j += 1
            if j > k:
                out[k:j] = stepper.dense((taus[k:j] - stepper.tau_old) / stepper.h_used)
                k = j
            gone = _outside(sys.model, stepper.y[:, :d]) & np.isnan(exit_time)
            exit_time[gone] = sign * stepper.tau
            if on_step is not None:
                on_step(stepper, sign)
    x, r, V = _unpack(out, d, opts.tangent)
    return BatchTrajectory(t_eval.copy(), x, r, V, exit_time, sys.name, mask)


def integrate_many(sys, X0, t_final, opts=IntegratorOptions(), t_eval=None, chunk: int = 256,
                   threads: Optional[int] = None) -> BatchTrajectory:
    """:func:`integrate_batch` over fixed-size chunks, optionally on a thread pool.

    Chunk boundaries do not depend on ``threads`` so results are identical
    for any thread count; chunks are merged in input order.
    """
    X0 = np.atleast_2d(np.asarray(X0, dtype=float))
    parts = [X0[i:i + chunk] for i in range(0, len(X0), chunk)]
    threads = default_threads() if threads is None else max(1, int(threads))

    def run(part):
        return integrate_batch(sys, part, t_final, opts, t_eval)

    if threads == 1 or len(parts) == 1:
        results = [run(p) for p in parts]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, parts))
    first = results[0]
    return BatchTrajectory(
        first.t,
        np.concatenate([b.x for b in results], axis=1),
        np.concatenate([b.r for b in results], axis=1),
        None if first.V is None else np.concatenate([b.V for b in results], axis=1),
        np.concatenate([b.exit_time for b in results]),
        first.system,
        first.periodic_mask,
    )


def sample_analytic(model, x0, times) -> Trajectory:
    """Trajectory of a closed-form flow model sampled at ``times``."""
    x0 = np.asarray(x0, dtype=float)
    times = np.asarray(times, dtype=float)
    x = np.array([model.flow(x0, t) for t in times])
    r = np.array([float(model.winding(x0, t)) for t in times])
    return Trajectory(times.copy(), x, r, None, model.kind, model.periodic_mask)


# ---------------------------------------------------------------------------
# sections and periodic orbits
# ---------------------------------------------------------------------------


class ReturnHit(NamedTuple):
    point: np.ndarray
    time: float
    r: float


def _is_modular(c, mask):
    c = np.asarray(c, dtype=float)
    if mask is None:
        return False
    support = c != 0
    return bool(np.all(mask[support]) and np.all(c[support] == np.round(c[support])))


def poincare_return(sys, x0, section, direction: int = 1, opts: IntegratorOptions = IntegratorOptions(),
                    t_max: float = 100.0, t_min: float = 1e-6, tol: float = 1e-10,
                    periodic: Optional[bool] = None) -> ReturnHit:
    """First crossing of ``{c . x = d}`` after ``t_min`` with the given orientation.

    ``direction=+1`` keeps crossings where ``c . x - d`` increases.  When the
    normal ``c`` has integer entries supported on angular coordinates the
    section is read modulo 1 (``periodic=None`` detects this).  The crossing
    is refined by bisection on fresh Runge-Kutta substeps until
    ``|c . x - d| <= tol`` (modulo 1 when periodic).  Raises
    :class:`ReturnTimeout` if nothing is found before ``t_max``.
    """
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    c, dval = section
    c = np.asarray(c, dtype=float)
    d = sys.dim
    mask = getattr(sys.model, "periodic_mask", None)
    modular = _is_modular(c, mask) if periodic is None else periodic
    plain = replace(opts, tangent=False, stop_on_exit=False)
    stepper = _Stepper(_make_rhs(sys, plain, 1.0), _initial_state(x0, d, False), plain, t_max)

    def level(y):
        return float(y[0, :d] @ c) - dval

    while stepper.tau < t_max:
        stepper.step(t_max)
        s0, s1 = level(stepper.y_old), level(stepper.y)
        if direction * (s1 - s0) <= 0:
            continue
        if modular:
            # integer levels in (s0, s1] going up, in [s1, s0) going down, in crossing order
            if direction > 0:
                levels = range(math.floor(s0) + 1, math.floor(s1) + 1)
            else:
                levels = range(math.ceil(s0) - 1, math.ceil(s1) - 1, -1)
        else:
            levels = [0.0] if (s0 < 0 <= s1 if direction > 0 else s1 <= 0 < s0) else []
        for k in levels:
            lo, hi = 0.0, 1.0
            g_lo = s0 - k
            y_mid = stepper.y
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                y_mid = stepper.substep(mid)
                g = level(y_mid) - k
                if abs(g) <= tol:
                    break
                if (g > 0) == (g_lo > 0):
                    lo, g_lo = mid, g
                else:
                    hi = mid
            t_cross = stepper.tau_old + mid * stepper.h_used
            if t_cross < t_min:
                continue
            point = y_mid[0, :d].copy()
            if mask is not None:
                point[mask] = np.mod(point[mask], 1.0)
            return ReturnHit(point, float(t_cross), float(y_mid[0, d]))
    raise ReturnTimeout(f"no crossing of the section before t={t_max}")


def return_map_jacobian(sys, x0, section, direction: int = 1, opts: IntegratorOptions = IntegratorOptions(),
                        h: float = 1e-5, **kw):
    """Central-difference Jacobian of the first-return map in section coordinates.

    Section coordinates are all chart coordinates except the one where the
    normal has its largest entry; that coordinate is solved for so that the
    perturbed points stay on the section.
    """
    c, dval = section
    c = np.asarray(c, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    mask = getattr(sys.model, "periodic_mask", None)
    pivot = int(np.argmax(np.abs(c)))
    free = [i for i in range(len(x0)) if i != pivot]

    def to_section(x):
        x = x.copy()
        x[pivot] += (dval - x @ c) / c[pivot]
        return x

    base = poincare_return(sys, to_section(x0), section, direction, opts, **kw).point
    J = np.empty((len(free), len(free)))
    for col, i in enumerate(free):
        xp, xm = x0.copy(), x0.copy()
        xp[i] += h
        xm[i] -= h
        pp = poincare_return(sys, to_section(xp), section, direction, opts, **kw).point
        pm = poincare_return(sys, to_section(xm), section, direction, opts, **kw).point
        diff = torus_difference(pp, pm, mask) if mask is not None else pp - pm
        J[:, col] = diff[free] / (2.0 * h)
    return J, base


def monodromy(sys, periodic_point, period: float, opts: IntegratorOptions = IntegratorOptions(),
              closure_tol: float = 1e-6):
    """Tangent map ``V(period)`` along a periodic orbit.

    Raises :class:`NotPeriodicError` when the orbit misses its starting point
    by more than ``closure_tol`` (torus metric on angular coordinates).
    """
    traj = integrate(sys, periodic_point, period, replace(opts, tangent=True))
    mask = getattr(sys.model, "periodic_mask", None)
    x0 = np.asarray(periodic_point, dtype=float)
    gap = torus_difference(traj.x[-1], x0, mask) if mask is not None else traj.x[-1] - x0
    residual = float(np.linalg.norm(gap))
    if residual > closure_tol:
        raise NotPeriodicError(f"orbit does not close: residual {residual:.3g} > {closure_tol:g}")
    return traj.V[-1]
