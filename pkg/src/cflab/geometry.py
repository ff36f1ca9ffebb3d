"""Model conformal symplectic manifolds in explicit global charts.

Two kinds of models live here:

* :class:`ConformalModel` exposes the Lee covector ``eta(x)`` and the matrix
  ``omega(x)`` of the conformal 2-form, with ``omega(x)[i, j] = w(e_i, e_j)``.
  Vector fields are then derived from the structure (see
  :mod:`cflab.hamiltonian`).
* :class:`AnalyticFlowModel` carries a flow given in closed form together with
  its winding, for the families whose natural chart is an embedding
  (unit sphere bundles, odd spheres).

All evaluation functions are vectorised over leading axes: a point array of
shape ``(..., dim)`` gives covectors of shape ``(..., dim)`` and matrices of
shape ``(..., dim, dim)``.

Volume orientation: the reference volume is the chart volume
``dz_1 ^ ... ^ dz_dim`` in the coordinate order documented by each factory.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "ChartPoint",
    "ConformalModel",
    "AnalyticFlowModel",
    "DomainError",
    "flat_torus",
    "conformal_cotangent_torus",
    "twisted_symplectization_unit_torus",
    "nonexact_conservative_model",
    "contact_sphere_model",
    "d_eta_closure_check",
    "closure_tolerance",
    "torus_difference",
]


class DomainError(ValueError):
    """A point lies outside the chart where a model is defined."""


def torus_difference(a, b, periodic_mask):
    """Difference ``a - b`` with the minimum-image convention on angular axes."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    mask = np.asarray(periodic_mask, dtype=bool)
    if mask.any():
        d = np.where(mask, d - np.round(d), d)
    return d


@dataclass(frozen=True)
class ChartPoint:
    """A point of a single-chart model; angular entries are taken mod 1."""

    coords: np.ndarray
    periodic_mask: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        mask = np.asarray(self.periodic_mask, dtype=bool)
        if coords.shape != mask.shape:
            raise ValueError("coords and periodic_mask must have the same length")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "periodic_mask", mask)

    @property
    def dim(self) -> int:
        return self.coords.shape[-1]

    def normalized(self) -> "ChartPoint":
        c = self.coords.copy()
        c[self.periodic_mask] = np.mod(c[self.periodic_mask], 1.0)
        return ChartPoint(c, self.periodic_mask)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coords, dtype=dtype)


@dataclass(frozen=True)
class ConformalModel:
    """Conformal symplectic structure ``(eta, omega)`` on one chart.

    Attributes
    ----------
    dim : int
        Even chart dimension ``2n``.
    eta : callable
        ``eta(x) -> (..., dim)``, the Lee covector.
    omega : callable
        ``omega(x) -> (..., dim, dim)`` with ``omega(x)[i, j] = w(e_i, e_j)``.
    kind : str
        Family tag.
    periodic_mask : ndarray of bool
        Angular coordinates, identified mod 1.
    bounds : ndarray or None
        ``(dim, 2)`` array of chart limits, ``inf`` where unbounded.
    labels : tuple of str
        Coordinate names, in chart order.
    constant_omega : ndarray or None
        Set when ``omega`` does not depend on the point; lets field solves
        reuse one factorisation.
    """

    dim: int
    eta: Callable[[np.ndarray], np.ndarray]
    omega: Callable[[np.ndarray], np.ndarray]
    kind: str
    periodic_mask: np.ndarray
    bounds: Optional[np.ndarray] = None
    labels: tuple = ()
    params: dict = field(default_factory=dict)
    constant_omega: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.constant_omega is not None:
            # inverse of omega^T, used as X = (grad H - H eta) @ inv(omega)
            object.__setattr__(self, "_omega_inv", np.linalg.inv(self.constant_omega))

    def normalize(self, x):
        x = np.array(x, dtype=float)
        x[..., self.periodic_mask] = np.mod(x[..., self.periodic_mask], 1.0)
        return x

    def point(self, coords) -> ChartPoint:
        return ChartPoint(np.asarray(coords, dtype=float), self.periodic_mask)

    def inside(self, x, margin: float = 0.0):
        """Boolean (per point) membership of the closed chart box shrunk by ``margin``."""
        x = np.asarray(x, dtype=float)
        if self.bounds is None:
            return np.ones(x.shape[:-1], dtype=bool)
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        return np.all((x >= lo + margin) & (x <= hi - margin), axis=-1)

    def difference(self, a, b):
        return torus_difference(a, b, self.periodic_mask)

    def distance(self, a, b):
        return np.linalg.norm(self.difference(a, b), axis=-1)


@dataclass(frozen=True)
class AnalyticFlowModel:
    """A flow given in closed form, with its winding and Hamiltonian.

    ``flow(x, t)`` and ``winding(x, t)`` accept a point array of shape
    ``(..., ambient_dim)`` and a scalar time.  ``project`` maps ambient
    coordinates back onto the model (unit vectors renormalised, angles
    reduced); ``ambient_dim`` may exceed the manifold dimension ``dim``.
    """

    dim: int
    ambient_dim: int
    flow: Callable[[np.ndarray, float], np.ndarray]
    winding: Callable[[np.ndarray, float], np.ndarray]
    H: Callable[[np.ndarray], np.ndarray]
    kind: str
    periodic_mask: np.ndarray
    project: Callable[[np.ndarray], np.ndarray]
    labels: tuple = ()
    params: dict = field(default_factory=dict)
    sets: dict = field(default_factory=dict)

    def difference(self, a, b):
        return torus_difference(a, b, self.periodic_mask)

    def distance(self, a, b):
        return np.linalg.norm(self.difference(a, b), axis=-1)


# ---------------------------------------------------------------------------
# chart models
# ---------------------------------------------------------------------------


def flat_torus(n: int, lee, check: bool = True) -> ConformalModel:
    """Flat torus ``T^{2n}`` with ``omega = sum dx_i ^ dy_i`` and constant Lee form.

    Coordinates are ordered ``(x_1, ..., x_n, y_1, ..., y_n)`` so that
    ``omega`` is the block matrix ``[[0, I], [-I, 0]]``; ``lee`` lists the
    coefficients of ``eta`` in the same order.

    A constant 2-form is closed, so ``d omega = eta ^ omega`` forces
    ``eta ^ omega = 0``.  For ``n >= 2`` wedging with a non-degenerate 2-form
    is injective on 1-forms and only ``lee = 0`` gives a valid structure; with
    ``check=True`` any other choice is rejected.  Pass ``check=False`` to build
    the invalid pair anyway (useful as a negative control).
    """
    n = int(n)
    if n < 1:
        raise ValueError(f"invalid dimension: n must be >= 1, got {n}")
    lee = np.asarray(lee, dtype=float)
    if lee.shape != (2 * n,):
        raise ValueError(f"lee must have length {2 * n}, got shape {lee.shape}")
    if check and n >= 2 and np.any(lee != 0.0):
        raise ValueError(
            "a constant Lee form on a flat torus of dimension >= 4 is not "
            "compatible with a constant omega (eta ^ omega != 0); "
            "use check=False to build it as a negative control"
        )
    dim = 2 * n
    om = np.zeros((dim, dim))
    om[:n, n:] = np.eye(n)
    om[n:, :n] = -np.eye(n)
    om.setflags(write=False)
    lee = lee.copy()
    lee.setflags(write=False)

    def eta(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(lee, x.shape).copy()

    def omega(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(om, x.shape[:-1] + (dim, dim)).copy()

    labels = tuple(f"x{i + 1}" for i in range(n)) + tuple(f"y{i + 1}" for i in range(n))
    if n == 1:
        labels = ("x", "y")
    return ConformalModel(
        dim=dim,
        eta=eta,
        omega=omega,
        kind="FlatTorus",
        periodic_mask=np.ones(dim, dtype=bool),
        bounds=None,
        labels=labels,
        params={"n": n, "lee": lee.tolist()},
        constant_omega=om,
    )


def conformal_cotangent_torus(n: int, beta, p_bound: float) -> ConformalModel:
    """Conformal cotangent bundle of ``T^n`` twisted by ``beta = sum b_i dq_i``.

    Coordinates ``(q_1..q_n, p_1..p_n)`` with ``q`` angular and
    ``|p_i| <= p_bound``.  With the Liouville form ``lam = sum p_i dq_i`` the
    structure is ``eta = sum b_i dq_i`` and

        omega = -(d lam - eta ^ lam)
              = sum dq_i ^ dp_i + sum_{i<j} (b_i p_j - b_j p_i) dq_i ^ dq_j,

    since ``-d lam = sum dq_i ^ dp_i`` and
    ``eta ^ lam = sum_{i<j} (b_i p_j - b_j p_i) dq_i ^ dq_j``.
    """
    n = int(n)
    if n < 1:
        raise ValueError(f"invalid dimension: n must be >= 1, got {n}")
    if not p_bound > 0:
        raise ValueError(f"p_bound must be positive, got {p_bound}")
    b = np.asarray(beta, dtype=float)
    if b.shape != (n,):
        raise ValueError(f"beta must have length {n}, got shape {b.shape}")
    b = b.copy()
    b.setflags(write=False)
    dim = 2 * n

    def eta(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        out[..., :n] = b
        return out

    def omega(x):
        x = np.asarray(x, dtype=float)
        p = x[..., n:]
        out = np.zeros(x.shape[:-1] + (dim, dim))
        # B_ij = b_i p_j - b_j p_i on the (q, q) block
        out[..., :n, :n] = b[:, None] * p[..., None, :] - p[..., :, None] * b[None, :]
        idx = np.arange(n)
        out[..., idx, n + idx] = 1.0
        out[..., n + idx, idx] = -1.0
        return out

    bounds = np.empty((dim, 2))
    bounds[:n] = (-np.inf, np.inf)
    bounds[n:] = (-p_bound, p_bound)
    labels = tuple(f"q{i + 1}" for i in range(n)) + tuple(f"p{i + 1}" for i in range(n))
    mask = np.zeros(dim, dtype=bool)
    mask[:n] = True
    return ConformalModel(
        dim=dim,
        eta=eta,
        omega=omega,
        kind="ConformalCotangentTorus",
        periodic_mask=mask,
        bounds=bounds,
        labels=labels,
        params={"n": n, "beta": b.tolist(), "p_bound": float(p_bound)},
    )


# ---------------------------------------------------------------------------
# closed-form flows
# ---------------------------------------------------------------------------


def _unit(v, what):
    v = np.array(v, dtype=float)
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise ValueError(f"{what} must be non-zero")
    if np.any(np.abs(norm - 1.0) > 1e-12):
        warnings.warn(f"{what} is not a unit vector; normalising", stacklevel=3)
        v = v / norm
    return v


def twisted_symplectization_unit_torus(n: int, a) -> AnalyticFlowModel:
    """Standard Lee flow of the ``beta``-twisted symplectization of ``T^1 T^n``.

    Points are stored as ``(x, v, theta)`` with ``x`` in ``T^n`` (angular),
    ``v`` a unit vector of ``R^n`` and ``theta`` in ``S^1``; the ambient
    dimension is ``2n + 1`` and the manifold dimension is ``2n``.  With
    ``beta = sum a_i dx_i`` the flow is

        (x, v, theta) -> (x + t v, v, theta + t <a, v>)

    and ``H = 1`` with vanishing winding.
    """
    n = int(n)
    if n < 1:
        raise ValueError(f"invalid dimension: n must be >= 1, got {n}")
    a = np.asarray(a, dtype=float)
    if a.shape != (n,):
        raise ValueError(f"a must have length {n}, got shape {a.shape}")
    a = a.copy()
    a.setflags(write=False)

    def project(z):
        z = np.array(z, dtype=float)
        z[..., n:2 * n] = _unit(z[..., n:2 * n], "v")
        return z

    def flow(z, t):
        z = project(z)
        out = z.copy()
        v = z[..., n:2 * n]
        out[..., :n] = z[..., :n] + t * v
        out[..., 2 * n] = z[..., 2 * n] + t * (v @ a)
        return out

    def winding(z, t):
        z = np.asarray(z, dtype=float)
        return np.zeros(z.shape[:-1])

    def H(z):
        z = np.asarray(z, dtype=float)
        return np.ones(z.shape[:-1])

    mask = np.zeros(2 * n + 1, dtype=bool)
    mask[:n] = True
    mask[2 * n] = True
    labels = tuple(f"x{i + 1}" for i in range(n)) + tuple(f"v{i + 1}" for i in range(n)) + ("theta",)
    return AnalyticFlowModel(
        dim=2 * n,
        ambient_dim=2 * n + 1,
        flow=flow,
        winding=winding,
        H=H,
        kind="TwistedSymplectization",
        periodic_mask=mask,
        project=project,
        labels=labels,
        params={"n": n, "a": a.tolist()},
    )


def nonexact_conservative_model(n: int) -> AnalyticFlowModel:
    """``H = p_1`` on the (untwisted) conformal symplectization of ``T^1 T^n``.

    Points are ``(q, p, theta)`` with ``q`` angular, ``p`` a unit vector and
    ``theta`` angular.  The flow translates ``q_1`` at unit speed and leaves
    everything else fixed, so the winding vanishes and ``H`` is invariant even
    though ``{H = 0}`` carries the loop ``theta -> (q, p, theta)`` on which
    ``eta = -d theta`` integrates to ``-1``.
    """
    n = int(n)
    if n < 1:
        raise ValueError(f"invalid dimension: n must be >= 1, got {n}")

    def project(z):
        z = np.array(z, dtype=float)
        z[..., n:2 * n] = _unit(z[..., n:2 * n], "p")
        return z

    def flow(z, t):
        out = project(z)
        out[..., 0] = out[..., 0] + t
        return out

    def winding(z, t):
        z = np.asarray(z, dtype=float)
        return np.zeros(z.shape[:-1])

    def H(z):
        return np.asarray(z, dtype=float)[..., n]

    mask = np.zeros(2 * n + 1, dtype=bool)
    mask[:n] = True
    mask[2 * n] = True
    labels = tuple(f"q{i + 1}" for i in range(n)) + tuple(f"p{i + 1}" for i in range(n)) + ("theta",)
    return AnalyticFlowModel(
        dim=2 * n,
        ambient_dim=2 * n + 1,
        flow=flow,
        winding=winding,
        H=H,
        kind="NonexactConservative",
        periodic_mask=mask,
        project=project,
        labels=labels,
        params={"n": n},
    )


def contact_sphere_model(n: int) -> AnalyticFlowModel:
    """Normalised hyperbolic rotation on the contact sphere ``S^{2n-1}``.

    Points are unit vectors ``z = (x, y)`` of ``R^n x R^n``.  The flow is
    ``Phi_t(z) / |Phi_t(z)|`` with

        Phi_t(x, y) = (cosh t x + sinh t y, sinh t x + cosh t y),

    evaluated through ``u = (x + y) / 2``, ``w = (x - y) / 2`` as
    ``Phi_t = (e^t u + e^-t w, e^t u - e^-t w)`` and rescaled by ``e^-|t|``
    so that large ``|t|`` does not overflow.  The winding is
    ``-log |Phi_t(z)|^2``.  ``sets["L+"]`` and ``sets["L-"]`` are distance
    functions to the Legendrian subspaces ``{x = y}`` and ``{x = -y}``.
    """
    n = int(n)
    if n < 2:
        raise ValueError(f"contact sphere needs n >= 2, got {n}")

    def project(z):
        return _unit(z, "z")

    def _split(z):
        x, y = z[..., :n], z[..., n:]
        return 0.5 * (x + y), 0.5 * (x - y)

    def flow(z, t):
        z = project(z)
        u, w = _split(z)
        s = abs(t)
        eu, ew = np.exp(t - s), np.exp(-t - s)
        out = np.concatenate([eu * u + ew * w, eu * u - ew * w], axis=-1)
        return out / np.linalg.norm(out, axis=-1, keepdims=True)

    def winding(z, t):
        z = project(z)
        u, w = _split(z)
        with np.errstate(divide="ignore"):
            lu = np.log(2.0 * np.sum(u * u, axis=-1))
            lw = np.log(2.0 * np.sum(w * w, axis=-1))
        return -np.logaddexp(2.0 * t + lu, -2.0 * t + lw)

    def H(z):
        z = np.asarray(z, dtype=float)
        return 0.5 * (np.sum(z[..., :n] ** 2, axis=-1) - np.sum(z[..., n:] ** 2, axis=-1))

    def dist_plus(z):
        z = np.asarray(z, dtype=float)
        return np.linalg.norm(z[..., :n] - z[..., n:], axis=-1) / np.sqrt(2.0)

    def dist_minus(z):
        z = np.asarray(z, dtype=float)
        return np.linalg.norm(z[..., :n] + z[..., n:], axis=-1) / np.sqrt(2.0)

    labels = tuple(f"x{i + 1}" for i in range(n)) + tuple(f"y{i + 1}" for i in range(n))
    return AnalyticFlowModel(
        dim=2 * n - 1,
        ambient_dim=2 * n,
        flow=flow,
        winding=winding,
        H=H,
        kind="ContactSphere",
        periodic_mask=np.zeros(2 * n, dtype=bool),
        project=project,
        labels=labels,
        params={"n": n},
        sets={"L+": dist_plus, "L-": dist_minus},
    )


# ---------------------------------------------------------------------------
# structure checks
# ---------------------------------------------------------------------------


def _cyclic_sum(T):
    # T[..., i, j, k] -> T_ijk + T_jki + T_kij
    return T + np.moveaxis(T, (-3, -2, -1), (-1, -3, -2)) + np.moveaxis(T, (-3, -2, -1), (-2, -1, -3))


def d_eta_closure_check(model: ConformalModel, x, h: float = 1e-4) -> float:
    """Largest component of ``d omega - eta ^ omega`` at ``x``, by central differences.

    With ``W = omega`` as a matrix the 3-form has components

        (dW)_ijk = d_i W_jk + d_j W_ki + d_k W_ij,
        (eta ^ W)_ijk = eta_i W_jk + eta_j W_ki + eta_k W_ij,

    and the derivatives are approximated with step ``h`` (error ``O(h^2)``).
    Raises :class:`DomainError` when the stencil leaves a bounded chart.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    x = np.asarray(x, dtype=float)
    d = model.dim
    if x.shape != (d,):
        raise ValueError(f"expected a point of dimension {d}")
    if not model.inside(x, margin=h):
        raise DomainError(f"point {x} is outside the chart interior of {model.kind}")
    steps = h * np.eye(d)
    dW = (model.omega(x + steps) - model.omega(x - steps)) / (2.0 * h)  # (k, i, j)
    W = model.omega(x)
    e = model.eta(x)
    dw = _cyclic_sum(dW)
    ew = _cyclic_sum(e[:, None, None] * W[None, :, :])
    return float(np.max(np.abs(dw - ew)))


def closure_tolerance(model: ConformalModel, x) -> float:
    """Default acceptance threshold ``1e-6 (1 + |omega(x)|)`` for the closure residual."""
    return 1e-6 * (1.0 + float(np.linalg.norm(model.omega(np.asarray(x, dtype=float)))))
