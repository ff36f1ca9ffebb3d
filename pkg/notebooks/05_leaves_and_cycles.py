"""
Leaves, periodic Lee orbits and asymptotic cycles
=================================================

Three identities about the Lee form:

* along a leaf of ``ker(dH - H eta)``, ``H(end) = e^{int eta} H(start)``;
* on the twisted symplectization of the unit cotangent bundle of ``T^2``,
  the Lee flow has a periodic orbit only when some integer direction ``w``
  has ``<a, w>`` rational, so irrational independent ``a`` gives none;
* the asymptotic cycle of an orbit pairs to zero with ``[eta]``.
"""

import math

import numpy as np

from cflab import scenarios as S
from cflab.diagnostics import (
    asymptotic_cycle,
    leaf_trace,
    lee_periodic_orbit_enumeration,
    lee_periodic_orbit_search,
)
from cflab.integrator import integrate

# %% Leaf identity with fourth-order convergence
sin = S.build("sin2d")
seed = np.array([0.1, 0.2])
for steps in (250, 500, 1000):
    print(f"steps {steps:5d}: residual {leaf_trace(sin.system, seed, 2.0, steps).residual:.3e}")

# %% Periodic Lee orbits
print("a = (sqrt2, sqrt3):", len(lee_periodic_orbit_search(2, (math.sqrt(2), math.sqrt(3)), 50.0, 20)), "orbits")
found = lee_periodic_orbit_search(2, (0.5, 1 / 3), 50.0, 20)
oracle = lee_periodic_orbit_enumeration(2, (0.5, 1 / 3), 50.0, 20)
print("a = (1/2, 1/3):", len(found), "orbits, enumeration agrees:", [c.w for c in found] == [c.w for c in oracle])
print("first few:", [(c.w, round(c.tau, 6)) for c in found[:4]])

# %% Asymptotic cycle of the Lee flow on the 2-torus
lee = S.build("lee2d")
tr = integrate(lee.system, [0.2, 0.4], 1000.0, lee.options)
A = asymptotic_cycle(tr, [(1.0, 0.0), (0.0, 1.0)])
print("A =", A, " <[eta], A> =", float(np.dot([lee.params["a"], lee.params["b"]], A)))
