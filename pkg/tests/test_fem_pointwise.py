"""Quadrature, shape functions and constitutive laws."""
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import factorial

from poroperf.errors import DomainError, InadmissibleStateError
from poroperf.fem.constitutive import (Material, SpringBC, cauchy_stress, neo_hookean_pk2, porosity_from_pressure,
                                       pressure_from_porosity, skeleton_energy, solid_jacobian, spring_stiffness,
                                       spring_stiffness_derivative, total_pk2)
from poroperf.fem.elements import p2_dlam, p2_integrals, p2_values
from poroperf.fem.quadrature import simplex_rule


def _monomial_integral(exps):
    # mean over the simplex of prod lam_i^a_i: prod a_i! d! / (sum a + d)!
    d = len(exps) - 1
    return float(np.prod(factorial(exps)) * factorial(d) / factorial(sum(exps) + d))


@pytest.mark.parametrize("dim", [1, 2, 3])
@pytest.mark.parametrize("degree", [1, 2, 3, 4, 5])
def test_rule_exact_on_monomials(dim, degree):
    lam, w = simplex_rule(dim, degree)
    assert w.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(lam.sum(axis=1), 1.0) and np.all(lam >= 0)
    from itertools import product
    for exps in product(range(degree + 1), repeat=dim + 1):
        if sum(exps) > degree:
            continue
        got = np.sum(w * np.prod(lam ** np.array(exps), axis=1))
        want = _monomial_integral(exps)
        assert got == pytest.approx(want, rel=1e-12, abs=1e-15)


@pytest.mark.parametrize("dim", [2, 3])
def test_p2_partition_and_interpolation(dim):
    lam, w = simplex_rule(dim, 4)
    N = p2_values(lam, dim)
    assert np.allclose(N.sum(axis=1), 1.0)
    # nodal property: vertex and edge-midpoint nodes
    from poroperf.mesh import LOCAL_EDGES
    nodes = [np.eye(dim + 1)[i] for i in range(dim + 1)]
    nodes += [0.5 * (np.eye(dim + 1)[a] + np.eye(dim + 1)[b]) for a, b in LOCAL_EDGES[dim]]
    np.testing.assert_allclose(p2_values(np.array(nodes), dim), np.eye(len(nodes)), atol=1e-14)
    # tangential derivatives of the partition of unity vanish
    s = p2_dlam(lam, dim).sum(axis=1)
    assert np.allclose(s - s[:, :1], 0.0)
    np.testing.assert_allclose(w @ N, p2_integrals(dim), atol=1e-14)


def test_p2_integrals_known_values():
    np.testing.assert_allclose(p2_integrals(2), [0, 0, 0, 1 / 3, 1 / 3, 1 / 3], atol=1e-15)
    np.testing.assert_allclose(p2_integrals(3), [-0.05] * 4 + [0.2] * 6, atol=1e-15)


# -- hyperelasticity ---------------------------------------------------------------

def _fd_pk2(C, lam, mu, h=1e-6):
    n = C.shape[0]
    S = np.zeros_like(C)
    for i in range(n):
        for j in range(n):
            E = np.zeros_like(C)
            E[i, j] += 0.5 * h
            E[j, i] += 0.5 * h
            S[i, j] = 2 * (skeleton_energy(C + E, lam, mu) - skeleton_energy(C - E, lam, mu)) / (2 * h)
    return S


def test_reference_state_stress_free():
    np.testing.assert_allclose(neo_hookean_pk2(np.eye(3), 1.3, 0.7), 0.0, atol=1e-15)


def test_uniaxial_fd():
    C = np.diag([1.21, 1.0, 1.0])
    S = neo_hookean_pk2(C, 1.0, 1.0)
    np.testing.assert_allclose(S, _fd_pk2(C, 1.0, 1.0), rtol=1e-6, atol=1e-9)


@given(st.integers(0, 2**31 - 1))
def test_isotropy(seed):
    rng = np.random.default_rng(seed)
    A = np.eye(3) + 0.2 * rng.normal(size=(3, 3))
    C = A.T @ A
    R, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    lhs = R.T @ neo_hookean_pk2(C, 2.0, 0.8) @ R
    rhs = neo_hookean_pk2(R.T @ C @ R, 2.0, 0.8)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_total_stress_examples():
    np.testing.assert_allclose(total_pk2(np.eye(2), 2.5, 1.0, 1.0), -2.5 * np.eye(2), atol=1e-15)
    C = np.array([[1.1, 0.1], [0.1, 0.9]])
    np.testing.assert_allclose(total_pk2(C, 0.0, 1.0, 1.0), neo_hookean_pk2(C, 1.0, 1.0))
    sigma = cauchy_stress(np.eye(3), total_pk2(np.eye(3), 1.0, 1.0, 1.0))
    np.testing.assert_allclose(sigma, -np.eye(3), atol=1e-15)


def test_inadmissible_C():
    with pytest.raises(InadmissibleStateError):
        neo_hookean_pk2(np.diag([1.0, -1.0]), 1.0, 1.0)


# -- pressure/porosity ----------------------------------------------------------------

def test_porosity_reference():
    m = Material()
    assert porosity_from_pressure(0.0, 1.0, m) == pytest.approx(m.phi0, abs=1e-15)


def test_porosity_hand_inversion():
    # kappa = 1 with nu = 0.3 needs E = 3 (1 - 2 nu) = 1.2
    m = Material(E=1.2, nu=0.3, phi0=0.5)
    assert m.kappa == pytest.approx(1.0)
    assert solid_jacobian(1.0, m) == pytest.approx(1 / 3)
    assert porosity_from_pressure(1.0, 1.0, m) == pytest.approx(2 / 3)


@given(st.floats(-0.4, 50.0), st.floats(0.5, 2.0), st.floats(0.05, 0.95))
def test_porosity_roundtrip(p, J, phi0):
    m = Material(E=1.0, nu=0.3, phi0=phi0)
    phi = porosity_from_pressure(p, J, m)
    assert pressure_from_porosity(phi, J, m) == pytest.approx(p, abs=1e-12 * max(1.0, abs(p)))


def test_material_validation():
    for kw in ({"E": 0}, {"nu": 0.5}, {"phi0": 1.0}, {"k": -1}):
        with pytest.raises(DomainError):
            Material(**kw)


# -- springs ----------------------------------------------------------------------------

def test_spring_examples():
    bc = SpringBC(5e2, 15.0)
    assert spring_stiffness(0.0, bc) == 0.0
    assert spring_stiffness(1e3, bc) == pytest.approx(5e2)
    assert spring_stiffness(0.1, bc) == pytest.approx(2 * 500 / (1 + math.exp(-1.5)) - 500, rel=1e-14)
    assert spring_stiffness(0.1, bc) == pytest.approx(317.57, abs=5e-3)
    with pytest.raises(DomainError):
        spring_stiffness(-1.0, bc)


@given(st.floats(0.0, 2.0))
def test_spring_derivative_fd(u):
    bc = SpringBC(10.0, 15.0)
    h = 1e-7
    fd = (spring_stiffness(u + h, bc) - spring_stiffness(max(u - h, 0.0), bc)) / (u + h - max(u - h, 0.0))
    assert spring_stiffness_derivative(u, bc) == pytest.approx(fd, rel=1e-5, abs=1e-6)
