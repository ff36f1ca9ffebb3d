"""
A hyperbolic attracting periodic orbit
======================================

The base flow ``q1' = 1, q2' = -kappa sin(2 pi q2)`` on the 2-torus has an
attracting closed orbit ``q2 = 0`` with multiplier ``mu = e^{-2 pi kappa}``.
Its conformal lift to the cotangent bundle twisted by ``beta = r dq1`` keeps
the orbit on the zero section; the return map to ``q1 = 0`` then has the
three multipliers ``mu, e^r, e^r / mu``, all in ``(0, 1)`` when
``r < -2 pi kappa``.
"""

import math
import os
import sys
from dataclasses import replace

import numpy as np

from cflab import scenarios as S
from cflab.diagnostics import basin_map
from cflab.integrator import monodromy, return_map_jacobian
from cflab.svg import raster_plot

out = sys.argv[1] if len(sys.argv) > 1 else "notebook-out"
os.makedirs(out, exist_ok=True)

cot = S.build("cotangent_attractor")
kappa, r = cot.params["kappa"], cot.params["r"]
mu = math.exp(-2 * math.pi * kappa)

# %% Floquet multipliers of the full time-1 map and of the return map
point, period = cot.periodic_orbits["gamma"]
M = monodromy(cot.system, point, period, cot.options)
print("monodromy eigenvalues:", np.sort(np.linalg.eigvals(M).real))
c, d, direction = cot.sections["q1=0"]
J, _ = return_map_jacobian(cot.system, point, (c, d), direction, cot.options, t_min=0.5)
print("return map multipliers:", np.sort(np.linalg.eigvals(J).real))
print("closed form:           ", np.sort([mu, math.exp(r), math.exp(r) / mu]))

# %% Basin of the orbit in the (q2, p2) plane
grid = replace(cot.grid, n=(24, 24))
cells = basin_map(cot.system, grid, cot.attractors, 40.0, cot.options, threads=1)
labels = np.empty(grid.n, dtype=object)
for cell in cells:
    labels[cell.i, cell.j] = cell.label
# nodes near the repelling circle q2 = 1/2 are still on their way at T = 40
print("captured fraction:", np.mean([cell.label == "periodic_orbit" for cell in cells]))
with open(os.path.join(out, "cotangent_basin.svg"), "w") as fh:
    fh.write(raster_plot(labels, ["periodic_orbit"], (0, 1), (-0.25, 0.25), "q2", "p2",
                         "cotangent_attractor: basin at T = 40"))
