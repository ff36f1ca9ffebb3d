"""Conformal and contact Hamiltonian vector fields.

Convention: the contraction of a vector ``X`` with the 2-form matrix ``W`` is
the covector ``(i_X w)_j = sum_i X_i W[i, j]``.  The conformal Hamiltonian
field of ``H`` is the unique ``X`` with ``i_X w = dH - H eta``, i.e. the
solution of ``W^T X = grad H - H eta``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .geometry import ConformalModel

__all__ = [
    "StructureError",
    "HamiltonianSystem",
    "ContactSystem",
    "hamiltonian_vector_field",
    "eta_of_X",
    "fd_gradient",
    "fd_jacobian",
    "cotangent_lift_flow",
    "sphere_contact_system",
    "unit_torus_bundle_contact_system",
    "reeb_field",
    "contact_hamiltonian_vector_field",
    "symplectization_lift_field",
    "ContactFlowSystem",
]


class StructureError(ArithmeticError):
    """The structure matrix is singular where a field was requested."""


def fd_gradient(f, x, h=1e-6):
    """Central-difference gradient of a scalar function, vectorised over points."""
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    out = np.empty(x.shape)
    for k in range(d):
        e = np.zeros(d)
        e[k] = h
        out[..., k] = (f(x + e) - f(x - e)) / (2.0 * h)
    return out


def fd_jacobian(F, x, h=1e-5):
    """Central-difference Jacobian ``J[..., i, k] = dF_i / dx_k``."""
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    cols = []
    for k in range(d):
        e = np.zeros(d)
        e[k] = h
        cols.append((F(x + e) - F(x - e)) / (2.0 * h))
    return np.stack(cols, axis=-1)


@dataclass(frozen=True)
class HamiltonianSystem:
    """A conformal model together with a Hamiltonian.

    ``H`` maps points ``(..., dim)`` to values ``(...)``; ``gradH`` and
    ``jacobian`` are optional closed forms of the differential of ``H`` and
    of the Jacobian of the derived field.  Missing ones fall back on central
    differences with steps ``h_grad`` and ``h_jac``.
    """

    model: ConformalModel
    H: Callable[[np.ndarray], np.ndarray]
    name: str = "system"
    gradH: Optional[Callable[[np.ndarray], np.ndarray]] = None
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    h_grad: float = 1e-6
    h_jac: float = 1e-5

    @property
    def dim(self) -> int:
        return self.model.dim

    def grad(self, x):
        if self.gradH is not None:
            return self.gradH(x)
        return fd_gradient(self.H, x, self.h_grad)

    def field(self, x):
        return hamiltonian_vector_field(self, x)

    def field_jacobian(self, x):
        if self.jacobian is not None:
            return self.jacobian(x)
        return fd_jacobian(self.field, x, self.h_jac)

    def with_fd(self) -> "HamiltonianSystem":
        """Same system with both closed forms dropped (finite differences only)."""
        return HamiltonianSystem(self.model, self.H, self.name + "[fd]", None, None, self.h_grad, self.h_jac)


def hamiltonian_vector_field(sys: HamiltonianSystem, x):
    """Solve ``i_X w = dH - H eta`` at one point or a batch of points.

    The linear system ``W(x)^T X = grad H(x) - H(x) eta(x)`` is solved by LU
    with partial pivoting.  Raises :class:`StructureError` if ``W(x)`` is
    singular.
    """
    x = np.asarray(x, dtype=float)
    model = sys.model
    rhs = sys.grad(x) - sys.H(x)[..., None] * model.eta(x)
    if getattr(model, "constant_omega", None) is not None:
        # X^T W = rhs^T  <=>  X = rhs @ W^{-1}
        return rhs @ model._omega_inv
    W = model.omega(x)
    try:
        X = np.linalg.solve(np.swapaxes(W, -1, -2), rhs[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise StructureError(f"singular structure matrix for {sys.name}") from exc
    return X


def eta_of_X(sys: HamiltonianSystem, x):
    """Integrand ``eta(X)`` of the winding at ``x``."""
    x = np.asarray(x, dtype=float)
    return np.sum(sys.model.eta(x) * hamiltonian_vector_field(sys, x), axis=-1)


# ---------------------------------------------------------------------------
# cotangent lifts
# ---------------------------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def cotangent_lift_flow(base_flow, base_jacobian, beta, x, t, n_panels: int = 32, h: float = 1e-5):
    """Conformal lift of a base flow to the twisted cotangent bundle.

    Maps ``(q, p)`` to ``(f_t(q), e^{r_t(q)} p o (df_t)^{-1})`` where
    ``r_t(q) = int_0^t beta(d/ds f_s(q)) ds``.

    Parameters
    ----------
    base_flow : callable
        ``base_flow(q, s) -> q'`` in lifted (unreduced) coordinates.
    base_jacobian : callable
        ``base_jacobian(q, s) -> df_s(q)`` as an ``(n, n)`` matrix.
    beta : callable or array_like
        The closed 1-form on the base, as ``beta(q) -> covector`` or a
        constant covector.
    x : array_like
        ``(q, p)`` of length ``2n``.
    t : float
        Flow time.
    n_panels : int
        Composite Gauss-Legendre panels used for ``r_t``; the velocity
        ``d/ds f_s`` is taken by central differences with step ``h``.

    Returns
    -------
    ndarray
        The lifted point ``(q', p')``.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1] // 2
    q, p = x[:n], x[n:]
    if callable(beta):
        beta_fn = beta
    else:
        b = np.asarray(beta, dtype=float)

        def beta_fn(qq):
            return b

    r = 0.0
    if t != 0.0:
        edges = np.linspace(0.0, t, n_panels + 1)
        for s0, s1 in zip(edges[:-1], edges[1:]):
            mid, half = 0.5 * (s0 + s1), 0.5 * (s1 - s0)
            for node, weight in zip(_GL_NODES, _GL_WEIGHTS):
                s = mid + half * node
                vel = (base_flow(q, s + h) - base_flow(q, s - h)) / (2.0 * h)
                r += weight * half * float(np.dot(beta_fn(base_flow(q, s)), vel))
    J = np.asarray(base_jacobian(q, t), dtype=float)
    cond = np.linalg.cond(J)
    if not np.isfinite(cond) or cond > 1e12:
        warnings.warn(f"base Jacobian is ill-conditioned (cond={cond:.3g})", stacklevel=2)
    # p o J^{-1} as a row vector is J^{-T} p
    p_new = np.exp(r) * np.linalg.solve(J.T, p)
    return np.concatenate([np.asarray(base_flow(q, t), dtype=float), p_new])


# ---------------------------------------------------------------------------
# contact Hamiltonians on the two closed-form families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ContactSystem:
    """Contact Hamiltonian on a hypersurface of ``R^m`` with explicit contact form.

    ``alpha(z)`` is the ambient covector of the contact form, ``dalpha`` the
    constant ambient matrix of its differential and ``tangent_basis(z)`` an
    orthonormal basis (columns) of the tangent space of the hypersurface.
    ``beta`` is an optional closed 1-form used by the twisted symplectization.
    """

    family: str
    n: int
    alpha: Callable[[np.ndarray], np.ndarray]
    dalpha: np.ndarray
    tangent_basis: Callable[[np.ndarray], np.ndarray]
    H: Callable[[np.ndarray], np.ndarray]
    gradH: Callable[[np.ndarray], np.ndarray]
    beta: Optional[Callable[[np.ndarray], np.ndarray]] = None
    labels: tuple = field(default=())

    def dH_R(self, z):
        z = np.asarray(z, dtype=float)
        return float(np.dot(self.gradH(z), reeb_field(self, z)))


def _complement_basis(normals):
    """Orthonormal basis of the orthogonal complement of the given columns."""
    m = normals.shape[0]
    q, _ = np.linalg.qr(np.column_stack([normals, np.eye(m)]))
    return q[:, normals.shape[1]:m]


def _constant(value):
    def fn(z):
        return value

    return fn


def sphere_contact_system(n: int, H=None, gradH=None) -> ContactSystem:
    """Standard contact sphere ``S^{2n-1}`` with ``alpha = (x dy - y dx) / 2``.

    Without arguments the Hamiltonian is ``H = (|x|^2 - |y|^2) / 2``, whose
    contact flow is the normalised hyperbolic rotation of
    :func:`cflab.geometry.contact_sphere_model`.
    """
    n = int(n)
    if n < 2:
        raise ValueError(f"contact sphere needs n >= 2, got {n}")
    if H is None:
        def H(z):
            z = np.asarray(z, dtype=float)
            return 0.5 * (np.sum(z[..., :n] ** 2, axis=-1) - np.sum(z[..., n:] ** 2, axis=-1))

        def gradH(z):
            z = np.asarray(z, dtype=float)
            return np.concatenate([z[..., :n], -z[..., n:]], axis=-1)
    elif gradH is None:
        f = H

        def gradH(z):
            return fd_gradient(f, z)

    def alpha(z):
        z = np.asarray(z, dtype=float)
        return 0.5 * np.concatenate([-z[n:], z[:n]])

    D = np.zeros((2 * n, 2 * n))
    D[:n, n:] = np.eye(n)
    D[n:, :n] = -np.eye(n)

    def tangent_basis(z):
        z = np.asarray(z, dtype=float)
        return _complement_basis(z[:, None] / np.linalg.norm(z))

    return ContactSystem("sphere", n, alpha, D, tangent_basis, H, gradH, None,
                         tuple(f"x{i + 1}" for i in range(n)) + tuple(f"y{i + 1}" for i in range(n)))


def unit_torus_bundle_contact_system(n: int, H=None, gradH=None, a=None) -> ContactSystem:
    """Unit cotangent bundle ``T^1 T^n`` with ``alpha = sum p_i dq_i`` restricted to ``|p| = 1``.

    Ambient coordinates are ``(q, p)``.  ``H`` defaults to ``1``; ``a`` gives
    the closed form ``beta = sum a_i dq_i`` (zero by default).
    """
    n = int(n)
    if n < 1:
        raise ValueError(f"invalid dimension: n must be >= 1, got {n}")
    if H is None:
        def H(z):
            return np.ones(np.asarray(z).shape[:-1])

        def gradH(z):
            return np.zeros(np.asarray(z).shape)
    elif gradH is None:
        f = H

        def gradH(z):
            return fd_gradient(f, z)

    a = np.zeros(n) if a is None else np.asarray(a, dtype=float)
    b_ambient = np.concatenate([a, np.zeros(n)])

    def alpha(z):
        z = np.asarray(z, dtype=float)
        return np.concatenate([z[n:], np.zeros(n)])

    D = np.zeros((2 * n, 2 * n))
    D[n:, :n] = np.eye(n)
    D[:n, n:] = -np.eye(n)

    def tangent_basis(z):
        z = np.asarray(z, dtype=float)
        normal = np.concatenate([np.zeros(n), z[n:]])
        return _complement_basis(normal[:, None] / np.linalg.norm(normal))

    labels = tuple(f"q{i + 1}" for i in range(n)) + tuple(f"p{i + 1}" for i in range(n))
    return ContactSystem("unit_torus_bundle", n, alpha, D, tangent_basis, H, gradH,
                         _constant(b_ambient), labels)


def _contact_solve(sys: ContactSystem, z, value, dHR, dH):
    """Solve ``alpha(X) = value`` and ``i_X dalpha = dHR alpha - dH`` on the tangent space."""
    B = sys.tangent_basis(z)
    a = sys.alpha(z)
    D = sys.dalpha
    # (i_X dalpha)(w) = X^T D w, tested against every tangent basis vector
    M = np.vstack([(a @ B)[None, :], B.T @ D.T @ B])
    rhs = np.concatenate([[value], dHR * (a @ B) - dH @ B])
    c, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    return B @ c


def reeb_field(sys: ContactSystem, z):
    """Reeb field: ``alpha(R) = 1`` and ``i_R dalpha = 0`` on the tangent space."""
    z = np.asarray(z, dtype=float)
    return _contact_solve(sys, z, 1.0, 0.0, np.zeros(z.shape[-1]))


def contact_hamiltonian_vector_field(sys: ContactSystem, z):
    """Contact Hamiltonian field: ``alpha(X) = H`` and ``i_X dalpha = (dH.R) alpha - dH``."""
    if sys.family not in ("sphere", "unit_torus_bundle"):
        raise NotImplementedError(f"unsupported contact family {sys.family!r}")
    z = np.asarray(z, dtype=float)
    dH = np.asarray(sys.gradH(z), dtype=float)
    R = reeb_field(sys, z)
    return _contact_solve(sys, z, float(sys.H(z)), float(dH @ R), dH)


def symplectization_lift_field(sys: ContactSystem, z):
    """Field ``X + (beta(X) - dH.R) d/dtheta`` on the twisted symplectization ``Y x S^1``.

    Returns the ambient components of ``X`` followed by the ``theta`` component.
    """
    z = np.asarray(z, dtype=float)
    X = contact_hamiltonian_vector_field(sys, z)
    beta_X = 0.0 if sys.beta is None else float(np.dot(sys.beta(z), X))
    return np.concatenate([X, [beta_X - sys.dH_R(z)]])


class _AmbientChart(NamedTuple):
    periodic_mask: np.ndarray
    bounds: None = None


@dataclass(frozen=True)
class ContactFlowSystem:
    """A contact Hamiltonian field packaged for :func:`cflab.integrator.integrate`.

    Points are ambient coordinates of the contact manifold.  The winding
    rate is ``dH.R``: on the twisted symplectization the Lee form
    ``beta - d theta`` evaluated on the lifted field
    ``X + (beta(X) - dH.R) d/dtheta`` gives ``dH.R`` whatever ``beta`` is.
    """

    contact: ContactSystem
    name: str = "contact"

    @property
    def dim(self) -> int:
        return 2 * self.contact.n

    @property
    def model(self):
        mask = np.zeros(self.dim, dtype=bool)
        if self.contact.family == "unit_torus_bundle":
            mask[: self.contact.n] = True
        return _AmbientChart(mask)

    def H(self, x):
        return self.contact.H(x)

    def field(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, self.dim)
        out = np.array([contact_hamiltonian_vector_field(self.contact, z) for z in flat])
        return out.reshape(x.shape)

    def winding_rate(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, self.dim)
        return np.array([self.contact.dH_R(z) for z in flat]).reshape(x.shape[:-1])
