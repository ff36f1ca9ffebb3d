"""Winding-based diagnostics: conservative/dissipative labels, basins, recurrence,
leaves of the invariant distribution, periodic Lee orbits and asymptotic cycles.

The conservative/dissipative dichotomy is asymptotic; everything here works
at a finite horizon with declared thresholds and an ``Undetermined`` escape.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum
from itertools import product
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .geometry import torus_difference
from .integrator import (
    IntegratorOptions,
    Trajectory,
    format_float,
    integrate_batch,
    integrate_many,
)

__all__ = [
    "Label",
    "WindingClass",
    "BasinCell",
    "Attractor",
    "GridSpec",
    "LeafTrace",
    "PeriodicCandidate",
    "SingularPointError",
    "classify_winding",
    "classify_samples",
    "forward_backward_labels",
    "forward_backward_agreement",
    "labels_agree",
    "omega_limit_estimate",
    "basin_map",
    "basin_to_csv",
    "recurrence_distances",
    "recurrence_stats",
    "leaf_trace",
    "lee_periodic_orbit_search",
    "lee_periodic_orbit_enumeration",
    "asymptotic_cycle",
]

R_BIG = 20.0
FLAT_TOL = 0.5


class Label(str, Enum):
    CONSERVATIVE_PLUS = "ConservativePlus"
    DISSIPATIVE_PLUS = "DissipativePlus"
    CONSERVATIVE_MINUS = "ConservativeMinus"
    DISSIPATIVE_MINUS = "DissipativeMinus"
    UNDETERMINED = "Undetermined"


@dataclass(frozen=True)
class WindingClass:
    """Finite-horizon label with the statistics it was read from.

    ``sup_r`` and ``inf_r`` are taken over the whole sampled orbit.
    """

    label: Label
    r_final: float
    sup_r: float
    inf_r: float
    horizon: float

    def to_dict(self) -> dict:
        return {"label": self.label.value, "r_final": self.r_final, "sup_r": self.sup_r,
                "inf_r": self.inf_r, "horizon": self.horizon}


def _classify(t, r, R_big, flat_tol, char_time, warn=True) -> WindingClass:
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    span = t - t[0]
    T = float(abs(span[-1]))
    backward = span[-1] < 0
    stats = dict(r_final=float(r[-1]), sup_r=float(np.max(r)), inf_r=float(np.min(r)), horizon=T)
    if T < 10.0 * char_time:
        if warn:
            warnings.warn(f"horizon {T:g} is shorter than 10 characteristic times", stacklevel=3)
        return WindingClass(Label.UNDETERMINED, **stats)
    absr = np.abs(r)
    a = np.abs(span)
    quarter = absr[a >= 0.75 * T]
    half = absr[a >= 0.5 * T]
    slack = 1e-9 * (1.0 + abs(r[-1]))
    if abs(r[-1]) > R_big and np.all(np.diff(quarter) >= -slack):
        label = Label.DISSIPATIVE_MINUS if backward else Label.DISSIPATIVE_PLUS
    elif np.ptp(half) <= flat_tol and abs(r[-1]) <= R_big / 2:
        label = Label.CONSERVATIVE_MINUS if backward else Label.CONSERVATIVE_PLUS
    else:
        label = Label.UNDETERMINED
    return WindingClass(label, **stats)


def classify_winding(traj: Trajectory, R_big: float = R_BIG, flat_tol: float = FLAT_TOL,
                     char_time: float = 1.0) -> WindingClass:
    """Label an orbit from its winding samples.

    * dissipative: ``|r_T| > R_big`` and ``|r_t|`` non-decreasing over the
      last quarter of the horizon;
    * conservative: ``|r_t|`` varies by at most ``flat_tol`` over the second
      half and ``|r_T| <= R_big / 2``;
    * undetermined otherwise, or when the horizon is shorter than
      ``10 * char_time`` (with a warning).

    Backward trajectories get the ``Minus`` labels.
    """
    return _classify(traj.t, traj.r, R_big, flat_tol, char_time)


def classify_samples(t, r, R_big: float = R_BIG, flat_tol: float = FLAT_TOL, char_time: float = 1.0):
    """:func:`classify_winding` for every column of a batch winding array ``r[k, b]``."""
    r = np.asarray(r)
    if r.shape[0] and abs(t[-1] - t[0]) < 10.0 * char_time:
        warnings.warn("horizon is shorter than 10 characteristic times", stacklevel=2)
    return [_classify(t, r[:, b], R_big, flat_tol, char_time, warn=False) for b in range(r.shape[1])]


_AGREE = {(Label.CONSERVATIVE_PLUS, Label.CONSERVATIVE_MINUS), (Label.DISSIPATIVE_PLUS, Label.DISSIPATIVE_MINUS)}


def labels_agree(forward: WindingClass, backward: WindingClass) -> bool:
    """Conservative both ways or dissipative both ways."""
    return (forward.label, backward.label) in _AGREE


def forward_backward_labels(sys, samples, T: float, opts: IntegratorOptions = IntegratorOptions(rtol=1e-8, atol=1e-10),
                            n_out: int = 401, R_big: float = R_BIG, flat_tol: float = FLAT_TOL,
                            threads: Optional[int] = None):
    """Forward and backward labels of each sample over the horizon ``T``."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    fwd = integrate_many(sys, samples, T, opts, np.linspace(0.0, T, n_out), threads=threads)
    bwd = integrate_many(sys, samples, -T, opts, np.linspace(0.0, -T, n_out), threads=threads)
    return classify_samples(fwd.t, fwd.r, R_big, flat_tol), classify_samples(bwd.t, bwd.r, R_big, flat_tol)


def forward_backward_agreement(sys, samples, T: float, opts: IntegratorOptions = IntegratorOptions(rtol=1e-8, atol=1e-10),
                               **kw) -> float:
    """Fraction of samples whose forward and backward labels match.

    Conservative forward must pair with conservative backward and dissipative
    with dissipative; an undetermined label on either side counts as a
    mismatch.
    """
    fwd, bwd = forward_backward_labels(sys, samples, T, opts, **kw)
    agree = sum(labels_agree(f, b) for f, b in zip(fwd, bwd))
    return agree / len(fwd)


def omega_limit_estimate(traj: Trajectory, tail_fraction: float, H: Optional[Callable] = None):
    """Tail of the orbit as a proxy for its omega-limit set.

    Returns the samples in the last ``tail_fraction`` of the horizon and, if
    ``H`` is given, the largest ``|H|`` over them (``nan`` otherwise).
    """
    if not 0.0 < tail_fraction < 1.0:
        raise ValueError("tail_fraction must lie in (0, 1)")
    span = np.abs(traj.t - traj.t[0])
    T = span[-1]
    cloud = traj.x[span >= (1.0 - tail_fraction) * T]
    max_h = float(np.max(np.abs(H(cloud)))) if H is not None else float("nan")
    return cloud, max_h


# ---------------------------------------------------------------------------
# basins
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Attractor:
    """Attractor descriptor: a distance function and a capture radius."""

    name: str
    distance: Callable[[np.ndarray], np.ndarray]
    capture_radius: float


@dataclass(frozen=True)
class GridSpec:
    """Regular grid over two chart axes; other coordinates are taken from ``base``.

    Node ``(i, j)`` sits at ``lo + (hi - lo) * (i, j) / n`` (``endpoint=False``)
    or ``lo + (hi - lo) * (i, j) / (n - 1)`` (``endpoint=True``).
    """

    axes: tuple = (0, 1)
    n: tuple = (64, 64)
    lo: tuple = (0.0, 0.0)
    hi: tuple = (1.0, 1.0)
    base: tuple = (0.0, 0.0)
    endpoint: bool = False

    def points(self):
        ni, nj = self.n
        di = ni - 1 if self.endpoint else ni
        dj = nj - 1 if self.endpoint else nj
        ax, ay = self.axes
        base = np.asarray(self.base, dtype=float)
        idx, pts = [], []
        for i in range(ni):
            for j in range(nj):
                p = base.copy()
                p[ax] = self.lo[0] + (self.hi[0] - self.lo[0]) * i / di
                p[ay] = self.lo[1] + (self.hi[1] - self.lo[1]) * j / dj
                idx.append((i, j))
                pts.append(p)
        return idx, np.array(pts)


@dataclass(frozen=True)
class BasinCell:
    i: int
    j: int
    x0: np.ndarray
    label: str
    r_final: float
    dist_to_attractor: float


def basin_map(sys, grid: GridSpec, attractors: Sequence[Attractor], T: float,
              opts: IntegratorOptions = IntegratorOptions(rtol=1e-8, atol=1e-10),
              threads: Optional[int] = None):
    """Label every grid node by the attractor that captures it at time ``T``.

    A node is labelled with the first attractor whose distance from the
    endpoint is within its capture radius, ``"Undetermined"`` otherwise.
    ``dist_to_attractor`` is the distance to the labelling attractor (or to
    the nearest one for undetermined nodes).
    """
    idx, pts = grid.points()
    batch = integrate_many(sys, pts, T, opts, np.array([0.0, T]), threads=threads)
    end = batch.x[-1]
    dists = np.stack([np.asarray(a.distance(end), dtype=float) for a in attractors], axis=-1)
    cells = []
    for b, (i, j) in enumerate(idx):
        label, dist = "Undetermined", float(np.min(dists[b]))
        for k, a in enumerate(attractors):
            if dists[b, k] <= a.capture_radius:
                label, dist = a.name, float(dists[b, k])
                break
        cells.append(BasinCell(i, j, pts[b], label, float(batch.r[-1, b]), dist))
    return cells


def basin_to_csv(cells, grid: GridSpec) -> str:
    """CSV text with header ``i,j,x,y,label,r_final``."""
    ax, ay = grid.axes
    lines = ["i,j,x,y,label,r_final"]
    for c in cells:
        lines.append(",".join([str(c.i), str(c.j), format_float(c.x0[ax]), format_float(c.x0[ay]),
                               c.label, format_float(c.r_final)]))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# recurrence
# ---------------------------------------------------------------------------


def recurrence_distances(sys, samples, T: float, t_start: Optional[float] = None,
                         opts: IntegratorOptions = IntegratorOptions(rtol=1e-8, atol=1e-10),
                         resolution: float = 0.0125, chunk: int = 256):
    """Smallest distance between ``phi_t(x)`` and ``x`` for ``t`` in ``[t_start, T]``.

    The orbit is scanned through the continuous extension of every step with
    a spacing that keeps the chord between scan points below ``resolution``
    (taken from the largest stage speed of the step).  Angular coordinates
    use the minimum-image metric.  ``t_start`` defaults to ``T / 4``.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    t_start = T / 4.0 if t_start is None else t_start
    d = sys.dim
    mask = getattr(sys.model, "periodic_mask", None)
    out = []
    for lo in range(0, len(samples), chunk):
        x0 = samples[lo:lo + chunk]
        best = np.full(len(x0), np.inf)

        def scan(stepper, sign, x0=x0, best=best):
            a, b = stepper.tau_old, stepper.tau
            if b < t_start:
                return
            speed = float(np.max(np.linalg.norm(stepper.K[:, :, :d], axis=-1)))
            n_sub = max(2, int(math.ceil((b - a) * speed / resolution)) + 1)
            th0 = max(0.0, (t_start - a) / (b - a))
            for part in np.array_split(np.linspace(th0, 1.0, n_sub), max(1, n_sub // 2048)):
                xs = stepper.dense(part)[:, :, :d]
                diff = torus_difference(xs, x0[None], mask) if mask is not None else xs - x0[None]
                np.minimum(best, np.min(np.linalg.norm(diff, axis=-1), axis=0), out=best)

        integrate_batch(sys, x0, T, opts, np.array([0.0, T]), on_step=scan)
        out.append(best)
    return np.concatenate(out)


def recurrence_stats(sys, samples, T: float, eps: float, **kw) -> float:
    """Fraction of samples that come back within ``eps`` of themselves during ``[T/4, T]``."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    dmin = recurrence_distances(sys, samples, T, **kw)
    return float(np.mean(dmin <= eps))


# ---------------------------------------------------------------------------
# leaves of ker(dH - H eta)
# ---------------------------------------------------------------------------


class SingularPointError(ValueError):
    """``dH - H eta`` vanishes at the requested start point."""


class LeafTrace(NamedTuple):
    curve: np.ndarray
    eta_integral: np.ndarray
    residuals: np.ndarray
    residual: float


def leaf_trace(sys, x0, arclen: float, steps: int = 1000) -> LeafTrace:
    """Trace the leaf of ``ker(dH - H eta)`` through ``x0`` on a surface.

    The leaf is parametrised by arclength: the covector ``(a1, a2)`` of
    ``dH - H eta`` is turned into the unit vector ``(-a2, a1) / |a|`` and the
    curve is advanced together with ``int eta`` by classical RK4 with
    ``steps`` equal steps.  The reported residual is the largest
    ``|H(g(s)) - exp(int_0^s eta) H(g(0))|`` along the curve.
    """
    if sys.dim != 2:
        raise ValueError("leaf_trace is defined on surfaces only")
    x0 = np.asarray(x0, dtype=float)
    eta = sys.model.eta

    def covector(x):
        return sys.grad(x) - sys.H(x)[..., None] * eta(x)

    if np.linalg.norm(covector(x0)) < 1e-12:
        raise SingularPointError(f"dH - H eta vanishes at {x0}")

    def rhs(z):
        x = z[:2]
        a = covector(x)
        v = np.array([-a[1], a[0]]) / np.hypot(a[0], a[1])
        return np.array([v[0], v[1], float(eta(x) @ v)])

    h = arclen / steps
    z = np.array([x0[0], x0[1], 0.0])
    traj = [z]
    for _ in range(steps):
        k1 = rhs(z)
        k2 = rhs(z + 0.5 * h * k1)
        k3 = rhs(z + 0.5 * h * k2)
        k4 = rhs(z + h * k3)
        z = z + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        traj.append(z)
    traj = np.array(traj)
    curve, integral = traj[:, :2], traj[:, 2]
    res = np.abs(sys.H(curve) - np.exp(integral) * sys.H(x0))
    return LeafTrace(curve, integral, res, float(np.max(res)))


# ---------------------------------------------------------------------------
# periodic orbits of the twisted Lee flow
# ---------------------------------------------------------------------------


class PeriodicCandidate(NamedTuple):
    w: tuple
    v: np.ndarray
    tau: float


def _primitive(w):
    g = 0
    for c in w:
        g = math.gcd(g, abs(int(c)))
    return g == 1


def lee_periodic_orbit_search(n: int, a, tau_max: float, denom_max: int, tol: float = 1e-9):
    """Periodic directions of the Lee flow ``(x, v, theta) -> (x + t v, v, theta + t <a, v>)``.

    A point with direction ``v`` is ``tau``-periodic iff ``tau v`` is an
    integer vector and ``tau <a, v>`` is an integer.  Writing
    ``v = w / |w|`` with ``w`` a primitive integer vector, this means
    ``tau = k |w|`` with ``k`` a positive integer and ``k <a, w>`` integral.
    For every primitive ``w`` with entries bounded by ``denom_max`` the
    smallest such ``tau <= tau_max`` is returned (``tol`` is the allowed
    distance to an integer).  Results are ordered lexicographically in ``w``.
    """
    if tau_max < 1 or denom_max < 1:
        raise ValueError("tau_max and denom_max must be >= 1")
    a = np.asarray(a, dtype=float)
    if a.shape != (n,):
        raise ValueError(f"a must have length {n}")
    found = []
    rng = range(-int(denom_max), int(denom_max) + 1)
    for w in product(rng, repeat=n):
        if not any(w) or not _primitive(w):
            continue
        norm = math.sqrt(sum(c * c for c in w))
        if norm > tau_max:
            continue
        aw = float(np.dot(a, w))
        for k in range(1, int(math.floor(tau_max / norm + 1e-12)) + 1):
            val = k * aw
            if abs(val - round(val)) <= tol:
                found.append(PeriodicCandidate(tuple(w), np.array(w, dtype=float) / norm, k * norm))
                break
    return found


def lee_periodic_orbit_enumeration(n: int, a, tau_max: float, denom_max: int, tol: float = 1e-9):
    """Brute-force counterpart of :func:`lee_periodic_orbit_search`.

    Enumerates every non-zero lattice vector ``m`` with ``|m| <= tau_max``
    (a candidate for ``tau v``), keeps those with ``<a, m>`` integral,
    reduces them to primitive directions with entries bounded by
    ``denom_max`` and returns the shortest ``|m|`` per direction.
    """
    a = np.asarray(a, dtype=float)
    R = int(math.floor(tau_max))
    axes = np.arange(-R, R + 1)
    m = np.stack(np.meshgrid(*([axes] * n), indexing="ij"), axis=-1).reshape(-1, n)
    norms = np.sqrt(np.sum(m * m, axis=1))
    keep = (norms > 0) & (norms <= tau_max + 1e-12)
    m, norms = m[keep], norms[keep]
    am = m @ a
    keep = np.abs(am - np.round(am)) <= tol
    m, norms = m[keep], norms[keep]
    g = np.gcd.reduce(np.abs(m), axis=1)
    w = m // g[:, None]
    keep = np.max(np.abs(w), axis=1) <= denom_max
    best = {}
    for wi, tau in zip(map(tuple, w[keep].tolist()), norms[keep]):
        if wi not in best or tau < best[wi]:
            best[wi] = float(tau)
    out = []
    for wi in sorted(best):
        wv = np.array(wi, dtype=float)
        out.append(PeriodicCandidate(wi, wv / np.linalg.norm(wv), best[wi]))
    return out


# ---------------------------------------------------------------------------
# asymptotic cycles
# ---------------------------------------------------------------------------


def asymptotic_cycle(traj: Trajectory, basis_forms, sys=None):
    """Birkhoff averages ``(1/T) int_0^T nu_i(X(phi_s x)) ds`` along ``traj``.

    A constant covector ``nu`` is integrated exactly as ``nu . (x_T - x_0)``
    on lifted coordinates.  A callable ``nu(x)`` is averaged with the
    trapezoid rule over the trajectory samples, which needs ``sys`` for the
    vector field.
    """
    T = traj.t[-1] - traj.t[0]
    if T == 0:
        raise ValueError("zero horizon")
    out = []
    for nu in basis_forms:
        if callable(nu):
            if sys is None:
                raise ValueError("a callable form needs the system to evaluate X")
            vals = np.sum(nu(traj.x) * sys.field(traj.x), axis=-1)
            out.append(float(np.sum(0.5 * (vals[1:] + vals[:-1]) * np.diff(traj.t)) / T))
        else:
            nu = np.asarray(nu, dtype=float)
            out.append(float(nu @ (traj.x[-1] - traj.x[0]) / T))
    return np.array(out)
