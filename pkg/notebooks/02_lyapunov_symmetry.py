"""
Lyapunov spectra pair up around the mean winding
================================================

For a conformal flow the exponents of an ergodic measure satisfy
``lambda_k + lambda_{2n-k+1} = rbar``, where ``rbar`` is the mean of
``eta(X)``.  We check this on the attracting circle of the sin example
(``{-2 pi, 0}``) and on the attracting periodic orbit of the twisted
cotangent scenario, where the Floquet exponents are known in closed form.
"""

import math

import numpy as np

from cflab import scenarios as S
from cflab.lyapunov import check_spectrum_symmetry, lyapunov_spectrum

# %% The attracting circle y = 1/2
sin = S.build("sin2d")
rep = lyapunov_spectrum(sin.system, [0.0, 0.5], 200.0, 0.5, sin.options)
print("sin2d exponents:", rep.exponents, " rbar:", rep.r_bar, " (-2 pi =", -2 * math.pi, ")")
print("pair residuals:", rep.residuals, " passed:", check_spectrum_symmetry(rep, 1e-2).passed)

# %% The periodic orbit q2 = p = 0 of the cotangent scenario
cot = S.build("cotangent_attractor")
kappa, r = cot.params["kappa"], cot.params["r"]
rep = lyapunov_spectrum(cot.system, np.zeros(4), 200.0, 0.5, cot.options)
want = np.sort([0.0, -2 * math.pi * kappa, r, r + 2 * math.pi * kappa])
print("cotangent exponents:", rep.exponents)
print("closed form:        ", want)
print("pair sums - rbar:", rep.residuals)

# %% Halving the renormalisation interval leaves the estimate unchanged
full = lyapunov_spectrum(sin.system, [0.0, 0.5], 200.0, 0.5, sin.options)
half = lyapunov_spectrum(sin.system, [0.0, 0.5], 200.0, 0.25, sin.options)
print("renorm 0.5 vs 0.25:", np.max(np.abs(half.exponents - full.exponents)))
