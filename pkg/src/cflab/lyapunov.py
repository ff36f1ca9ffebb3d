"""Lyapunov spectra by periodic QR re-orthonormalisation of the tangent flow.

For a conformal Hamiltonian flow the exponents come in pairs
``lambda_k + lambda_{2n-1-k} = rbar`` where ``rbar`` is the mean winding
rate along the orbit; :func:`check_spectrum_symmetry` measures that.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .integrator import IntegratorOptions, Trajectory, _initial_state, _make_rhs, _Stepper

__all__ = [
    "LyapunovReport",
    "RenormalizationError",
    "SymmetryCheck",
    "lyapunov_spectrum",
    "mean_winding",
    "check_spectrum_symmetry",
]


class RenormalizationError(FloatingPointError):
    """Tangent vectors overflowed or became singular between two QR steps."""


@dataclass(frozen=True)
class LyapunovReport:
    """Exponents in ascending order and the quantities used to check them.

    ``residuals[k] = exponents[k] + exponents[-1-k] - r_bar``.
    """

    exponents: np.ndarray
    r_bar: float
    residuals: np.ndarray
    horizon: float
    renorm_dt: float

    def to_dict(self) -> dict:
        return {
            "exponents": [float(v) for v in self.exponents],
            "r_bar": self.r_bar,
            "residuals": [float(v) for v in self.residuals],
            "horizon": self.horizon,
            "renorm_dt": self.renorm_dt,
        }


class SymmetryCheck(NamedTuple):
    passed: bool
    residuals: np.ndarray


def _pair_residuals(exponents, r_bar):
    lam = np.sort(np.asarray(exponents, dtype=float))
    n = len(lam) // 2
    return np.array([lam[k] + lam[-1 - k] - r_bar for k in range(n)])


def lyapunov_spectrum(sys, x0, T: float, renorm_dt: float = 0.5,
                      opts: IntegratorOptions = IntegratorOptions(rtol=1e-8, atol=1e-10)) -> LyapunovReport:
    """Estimate all Lyapunov exponents of the orbit through ``x0``.

    The tangent matrix is advanced with the orbit and replaced by the ``Q``
    factor of its QR decomposition every ``renorm_dt`` (signs fixed so that
    ``R`` has a positive diagonal); the exponents are the accumulated
    ``log R_kk`` divided by ``T``.  ``T`` must cover at least 100
    renormalisation intervals.
    """
    if renorm_dt <= 0:
        raise ValueError("renorm_dt must be positive")
    n_blocks = int(round(T / renorm_dt))
    if n_blocks < 100 or abs(n_blocks * renorm_dt - T) > 1e-9 * T:
        raise ValueError("T must be a multiple of renorm_dt with at least 100 intervals")
    d = sys.dim
    opts = replace(opts, tangent=True, stop_on_exit=False)
    f = _make_rhs(sys, opts, 1.0)
    stepper = _Stepper(f, _initial_state(x0, d, True), opts, T)
    sums = np.zeros(d)
    for k in range(1, n_blocks + 1):
        target = min(T, k * renorm_dt)
        while stepper.tau < target:
            stepper.step(target)
        y = stepper.y.copy()
        V = y[0, d + 1:].reshape(d, d)
        if not np.all(np.isfinite(V)):
            raise RenormalizationError(f"tangent map is not finite at t={stepper.tau:.6g}")
        Q, R = np.linalg.qr(V)
        diag = np.diag(R)
        if np.any(diag == 0):
            raise RenormalizationError(f"tangent map became singular at t={stepper.tau:.6g}")
        s = np.sign(diag)
        sums += np.log(np.abs(diag))
        y[0, d + 1:] = (Q * s).ravel()
        stepper.y = y
        stepper.fy = f(y)
    exponents = np.sort(sums / T)
    r_bar = float(stepper.y[0, d] / T)
    return LyapunovReport(exponents, r_bar, _pair_residuals(exponents, r_bar), float(T), float(renorm_dt))


def mean_winding(traj: Trajectory) -> float:
    """``(r_T - r_0) / T`` along a trajectory."""
    T = traj.t[-1] - traj.t[0]
    if T == 0:
        raise ValueError("zero horizon")
    return float((traj.r[-1] - traj.r[0]) / T)


def check_spectrum_symmetry(report: LyapunovReport, tol: float) -> SymmetryCheck:
    """Pass when every pair sum matches ``r_bar`` within ``tol``."""
    res = _pair_residuals(report.exponents, report.r_bar)
    return SymmetryCheck(bool(np.all(np.abs(res) <= tol)), res)
