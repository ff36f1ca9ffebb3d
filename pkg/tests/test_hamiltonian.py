import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cflab import scenarios as S
from cflab.geometry import conformal_cotangent_torus, flat_torus
from cflab.hamiltonian import (
    ContactFlowSystem,
    HamiltonianSystem,
    StructureError,
    contact_hamiltonian_vector_field,
    cotangent_lift_flow,
    eta_of_X,
    fd_jacobian,
    hamiltonian_vector_field,
    reeb_field,
    sphere_contact_system,
    symplectization_lift_field,
    unit_torus_bundle_contact_system,
)
from cflab.integrator import integrate

TAU = 2 * math.pi


def test_sin_field_closed_form(sin_sc):
    X = sin_sc.system.field(np.array([0.3, 0.125]))
    assert np.allclose(X, [TAU * math.cos(TAU / 8), math.sin(TAU / 8)])


def test_lee_field_is_minus_b_a():
    sys = HamiltonianSystem(flat_torus(1, (1.0, math.sqrt(2))), lambda x: np.ones(np.shape(x)[:-1]))
    X = sys.field(np.array([0.2, 0.7]))
    assert np.allclose(X, [-math.sqrt(2), 1.0], atol=1e-9)
    # i_L w = -eta with w(e_x, e_y) = 1: components (-X_y, X_x) = (-a, -b)
    W = sys.model.omega(np.zeros(2))
    assert np.allclose(X @ W, -sys.model.eta(np.zeros(2)), atol=1e-9)


def test_field_satisfies_defining_equation(cot_sc, rng):
    sys = cot_sc.system
    x = cot_sc.sampler(rng, 10)
    X = sys.field(x)
    lhs = np.einsum("bi,bij->bj", X, sys.model.omega(x))
    rhs = sys.grad(x) - sys.H(x)[:, None] * sys.model.eta(x)
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_fd_field_matches_analytic(cot_sc, rng):
    sys = cot_sc.system
    x = cot_sc.sampler(rng, 10)
    assert np.allclose(sys.with_fd().field(x), sys.field(x), atol=1e-8)
    assert np.allclose(fd_jacobian(sys.field, x), sys.field_jacobian(x), atol=1e-6)


def test_eta_of_X_sin(sin_sc):
    # eta = dx, so eta(X) = 2 pi cos 2 pi y
    y = np.array([[0.0, 0.1], [0.0, 0.4]])
    assert np.allclose(eta_of_X(sin_sc.system, y), TAU * np.cos(TAU * y[:, 1]))


def test_singular_structure_raises():
    m = conformal_cotangent_torus(1, (0.0,), 1.0)
    bad = replace(m, omega=lambda x: np.zeros(np.shape(x)[:-1] + (2, 2)))
    sys = HamiltonianSystem(bad, lambda x: np.asarray(x)[..., 1])
    with pytest.raises(StructureError):
        sys.field(np.array([0.1, 0.2]))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=4, max_size=4).filter(lambda v: np.linalg.norm(v) > 0.1))
def test_reeb_field_on_sphere(z):
    c = sphere_contact_system(2)
    z = np.array(z) / np.linalg.norm(z)
    R = reeb_field(c, z)
    assert c.alpha(z) @ R == pytest.approx(1.0, abs=1e-12)
    assert abs(R @ z) < 1e-12
    # the standard Reeb field is the Hopf rotation 2 (-y, x)
    assert np.allclose(R, 2 * np.concatenate([-z[2:], z[:2]]), atol=1e-10)


def test_contact_field_sphere_hyperbolic_rotation():
    c = sphere_contact_system(2)
    z = np.array([0.6, 0.0, 0.0, 0.8])
    X = contact_hamiltonian_vector_field(c, z)
    assert c.alpha(z) @ X == pytest.approx(float(c.H(z)), abs=1e-12)
    # tangent part of the linear field (y, x)
    lin = np.concatenate([z[2:], z[:2]])
    assert np.allclose(X, lin - (lin @ z) * z, atol=1e-10)


def test_contact_flow_system_winding_is_dH_R():
    c = sphere_contact_system(2)
    sys = ContactFlowSystem(c, "sphere")
    z = np.array([[0.6, 0.0, 0.0, 0.8], [0.5, 0.5, 0.5, 0.5]])
    assert np.allclose(sys.winding_rate(z), [c.dH_R(p) for p in z])
    assert sys.dim == 4


def test_lift_fields():
    a = np.array([math.sqrt(2), math.sqrt(3)])
    c = unit_torus_bundle_contact_system(2, a=a)
    z = np.array([0.1, 0.2, 0.6, 0.8])
    assert np.allclose(symplectization_lift_field(c, z), [0.6, 0.8, 0, 0, a @ [0.6, 0.8]], atol=1e-12)

    def H(w):
        return np.asarray(w)[..., 2]

    c1 = unit_torus_bundle_contact_system(2, H=H)
    X = symplectization_lift_field(c1, z)
    assert np.allclose(X, [1, 0, 0, 0, 0], atol=1e-9)


def test_cotangent_lift_flow_matches_integration(cot_sc):
    flow, jac = S.cotangent_base_flow(0.1)
    z = np.array([0.0, 0.3, 0.1, -0.1])
    tr = integrate(cot_sc.system, z, 1.0, cot_sc.options)
    assert np.allclose(cotangent_lift_flow(flow, jac, (-1.0, 0.0), z, 1.0), tr.x[-1], atol=1e-7)


def test_cotangent_lift_identity_at_zero_time():
    flow, jac = S.cotangent_base_flow(0.1)
    z = np.array([0.2, 0.3, 0.1, -0.1])
    assert np.allclose(cotangent_lift_flow(flow, jac, (-1.0, 0.0), z, 0.0), z)


def test_lift_ill_conditioned_warns():
    def flow(q, t):
        return q

    def jac(q, t):
        return np.diag([1.0, 1e-14])

    with pytest.warns(UserWarning, match="ill-conditioned"):
        cotangent_lift_flow(flow, jac, (0.0, 0.0), np.array([0, 0, 1.0, 1.0]), 1.0)


def test_batch_and_single_field_agree(cot_sc, rng):
    x = cot_sc.sampler(rng, 5)
    batch = hamiltonian_vector_field(cot_sc.system, x)
    single = np.array([hamiltonian_vector_field(cot_sc.system, p) for p in x])
    assert np.allclose(batch, single, atol=1e-14)
