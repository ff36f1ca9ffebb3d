"""
Conservative and dissipative orbits on the torus
================================================

``H = sin(2 pi y)`` on the torus with Lee form ``dx``.  Every orbit off the
two circles ``y = 0`` and ``y = 1/2`` winds off to ``r -> -inf`` and
converges to the attracting circle, so no point there is recurrent.
The Lee flow of an irrational form is the opposite extreme: zero winding
and every point recurrent.
"""

import os
import sys

import numpy as np

from cflab import scenarios as S
from cflab.diagnostics import classify_samples, recurrence_stats
from cflab.integrator import integrate, integrate_many
from cflab.svg import line_plot

out = sys.argv[1] if len(sys.argv) > 1 else "notebook-out"
os.makedirs(out, exist_ok=True)

# %% A single orbit against the closed form tan(pi y) = tan(pi y0) e^{2 pi t}
sin = S.build("sin2d")
tr = integrate(sin.system, [0.0, 0.25], 5.0, sin.options)
x, y, r = S.sin_closed_form([0.0, 0.25], 5.0)
print("endpoint error:", abs(tr.x[-1, 1] - y), " winding error:", abs(tr.r[-1] - r))

# %% A 32 x 32 grid: labels, final windings and recurrence
d = S.dichotomy_grid(sin, 32, 40.0, eps=0.05, threads=1)
labels, counts = d["labels"], {}
for lab in labels:
    counts[lab.value] = counts.get(lab.value, 0) + 1
print("labels off both circles:", counts)
print("largest r_T:", float(np.max(d["r_final"])), " recurrent fraction:", float(np.mean(d["recurrence_distance"] <= 0.05)))

# %% Winding curves of a few orbits
times = np.linspace(0, 20, 201)
curves = []
for y0 in (0.05, 0.2, 0.3, 0.45, 0.7, 0.9):
    t = integrate(sin.system, [0.0, y0], 20.0, sin.options, times)
    curves.append((t.t, t.r))
with open(os.path.join(out, "sin2d_winding.svg"), "w") as fh:
    fh.write(line_plot(curves, "t", "r_t", "sin2d: winding of six orbits"))

# %% The Lee flow of eta = dx + sqrt(2) dy is a rigid irrational translation
lee = S.build("lee2d")
pts = lee.sample(20, 0)
b = integrate_many(lee.system, pts, 200.0, lee.options, np.linspace(0, 200, 201), threads=1)
print("lee2d labels:", {c.label.value for c in classify_samples(b.t, b.r)})
print("lee2d recurrent fraction:", recurrence_stats(lee.system, pts, 500.0, 0.05, opts=lee.options))
