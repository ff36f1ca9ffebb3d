"""
A Legendrian attractor on the contact sphere
============================================

On ``S^3`` with ``alpha = (x dy - y dx) / 2`` the contact Hamiltonian
``H = (|x|^2 - |y|^2) / 2`` generates the normalised hyperbolic rotation.
Everything off ``L- = {x = -y}`` is drawn to the Legendrian circle
``L+ = {x = y}``.  The integrated contact field is compared with the
closed-form flow.
"""

from dataclasses import replace

import numpy as np

from cflab import scenarios as S
from cflab.hamiltonian import reeb_field
from cflab.integrator import integrate

sph = S.build("sphere_legendrian")
model, contact = sph.flow_model, sph.contact
dplus = model.sets["L+"]

# %% Distance to L+ after T = 10 for points at least 0.1 away from L-
pts = sph.sample(100, 0)
print("worst distance to L+:", max(float(dplus(model.flow(z, 10.0))) for z in pts))

# %% The Reeb field is normalised and the contact field matches the flow
z = pts[0]
print("alpha(R) =", float(contact.alpha(z) @ reeb_field(contact, z)))
tr = integrate(sph.system, z, 2.0, replace(sph.options, rtol=1e-10, atol=1e-12))
print("integrated vs closed form:", float(np.max(np.abs(tr.x[-1] - model.flow(z, 2.0)))))
print("winding vs closed form:   ", abs(float(tr.r[-1] - model.winding(z, 2.0))))
