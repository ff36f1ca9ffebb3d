"""Numerical laboratory for autonomous conformal Hamiltonian flows.

Modules
-------
geometry     model conformal symplectic manifolds in explicit charts
hamiltonian  conformal and contact Hamiltonian vector fields, lifts
integrator   adaptive flow of (x, winding, tangent map), sections, monodromy
diagnostics  conservative/dissipative labels, basins, recurrence, leaves
lyapunov     Lyapunov spectra and the pairing symmetry
scenarios    named examples with expected results and ``verify``
cli          the ``cflab`` command
"""

from .geometry import ChartPoint, ConformalModel, flat_torus, conformal_cotangent_torus
from .hamiltonian import HamiltonianSystem, hamiltonian_vector_field
from .integrator import IntegratorOptions, Trajectory, integrate
from .scenarios import build, verify

__version__ = "0.1.0"

__all__ = [
    "ChartPoint",
    "ConformalModel",
    "flat_torus",
    "conformal_cotangent_torus",
    "HamiltonianSystem",
    "hamiltonian_vector_field",
    "IntegratorOptions",
    "Trajectory",
    "integrate",
    "build",
    "verify",
]
