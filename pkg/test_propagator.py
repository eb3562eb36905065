"""
Test fundamental solutions, chi, cross Gram integrals and the integrator order
"""

import numpy as np
import pytest
from scipy.integrate import trapezoid

from conftest import PI2, STEPS
from errors import ContractViolationError, DomainError
from potential import ConstantDiagonalPotential, ZeroPotential, random_fourier
from propagator import (
    chi_at,
    chi_solution,
    cross_gram,
    cross_gram_boundary,
    propagate,
    propagate_endpoint,
    resolve_steps,
    step_doubling_ratio,
)


def test_resolve_steps():
    assert resolve_steps(16) == 16
    for bad in (15, 14, 17):
        with pytest.raises(ContractViolationError):
            resolve_steps(bad)


def test_free_solution_at_first_eigenvalue():
    sol = propagate(ZeroPotential(2), PI2, STEPS)
    assert np.linalg.norm(sol.phi[-1]) <= 1e-8
    assert np.allclose(sol.dphi[-1], -np.eye(2), atol=1e-8)


def test_free_solution_at_zero():
    sol = propagate(ZeroPotential(2), 0.0, 64)
    assert np.allclose(sol.phi, sol.xs[:, None, None] * np.eye(2), atol=1e-13)
    assert np.allclose(sol.dphi, np.eye(2), atol=1e-13)
    assert np.allclose(sol.S[-1], np.eye(2) / 3.0, atol=1e-13)


def test_constant_diagonal_closed_form():
    lam = PI2 + 10.0
    phi1 = propagate_endpoint(ConstantDiagonalPotential([0.0, 10.0]), [lam], STEPS).phi[0]
    z = np.sqrt(lam)
    assert phi1[0, 0] == pytest.approx(np.sin(z) / z, abs=1e-8)
    assert abs(phi1[1, 1]) <= 1e-8
    assert abs(phi1[0, 1]) <= 1e-14


def test_endpoint_matches_trajectory():
    V = random_fourier(2, seed=2)
    lams = np.array([-3.0, 7.5, 42.0 + 1.0j])
    endpoint = propagate_endpoint(V, lams, 256, with_lambda_derivative=True)
    for i, lam in enumerate(lams):
        sol = propagate(V, lam, 256, with_lambda_derivative=True)
        assert np.allclose(endpoint.phi[i], sol.phi[-1], atol=1e-11)
        assert np.allclose(endpoint.dphi[i], sol.dphi[-1], atol=1e-10)
        assert np.allclose(endpoint.phidot[i], sol.phidot[-1], atol=1e-11)


def test_lambda_derivative_matches_central_difference():
    V = random_fourier(2, seed=5)
    lam, delta = 12.3, 1e-4
    sol = propagate(V, lam, 1024, with_lambda_derivative=True)
    ends = propagate_endpoint(V, [lam - delta, lam + delta], 1024).phi
    assert np.allclose((ends[1] - ends[0]) / (2 * delta), sol.phidot[-1], atol=1e-5)


def test_wronskian_conserved():
    V = random_fourier(3, seed=9)
    sol = propagate(V, 17.0, 1024)
    W = np.swapaxes(sol.phi, 1, 2).conj() @ sol.dphi - np.swapaxes(sol.dphi, 1, 2).conj() @ sol.phi
    assert np.max(np.abs(W)) <= 1e-8


def test_gram_is_hermitian_and_starts_at_zero():
    sol = propagate(random_fourier(2, seed=6), 5.0, 512)
    assert np.array_equal(sol.S[0], np.zeros((2, 2)))
    assert np.allclose(sol.S, np.swapaxes(sol.S, 1, 2).conj(), atol=1e-14)


def test_gram_keeps_imaginary_part():
    V = random_fourier(2, seed=3, amplitude=5.0)
    sol = propagate(V, 12.0, 2048)
    gram = np.swapaxes(sol.phi, 1, 2).conj() @ sol.phi
    direct = trapezoid(gram, x=sol.xs, axis=0)
    assert np.max(np.abs(direct.imag)) > 1e-2
    assert np.allclose(sol.S[-1], direct, atol=1e-6)


def test_gram_is_nondecreasing():
    sol = propagate(random_fourier(2, seed=3), 40.0, 1024)
    assert np.min(np.linalg.eigvalsh(sol.S)) >= -1e-12
    increments = np.diff(sol.S, axis=0)
    assert np.min(np.linalg.eigvalsh(increments)) >= -1e-10


def test_x_end_validation():
    with pytest.raises(DomainError):
        propagate(ZeroPotential(1), 1.0, 16, x_end=1.5)


def test_chi_boundary_values():
    V = random_fourier(2, seed=1)
    chi, dchi = chi_at(V, 20.0, 1.0)
    assert np.array_equal(chi, np.zeros((2, 2)))
    assert np.array_equal(dchi, np.eye(2))

    sol = chi_solution(V, 20.0, 512)
    assert np.allclose(sol.chi[-1], 0.0, atol=1e-14)
    assert np.allclose(sol.dchi[-1], np.eye(2), atol=1e-14)

    with pytest.raises(DomainError):
        chi_at(V, 1.0, -0.5)


def test_chi_for_free_potential():
    lam = 2.0
    z = np.sqrt(lam)
    chi, dchi = chi_at(ZeroPotential(2), lam, 0.0, STEPS)
    assert np.allclose(chi, -np.sin(z) / z * np.eye(2), atol=1e-10)
    assert np.allclose(dchi, np.cos(z) * np.eye(2), atol=1e-10)

    batch_chi, _ = chi_at(ZeroPotential(2), [lam, 3.0], 0.0, STEPS)
    assert batch_chi.shape == (2, 2, 2)
    assert np.allclose(batch_chi[0], chi)


def test_chi_at_interior_point_matches_solution():
    V = random_fourier(2, seed=8)
    sol = chi_solution(V, 6.0, 512)
    chi, dchi = chi_at(V, 6.0, 0.25, 384)
    assert np.allclose(chi, sol.chi[128], atol=1e-9)
    assert np.allclose(dchi, sol.dchi[128], atol=1e-8)


def test_cross_gram_matches_boundary_formula():
    V = random_fourier(2, seed=3)
    group_phi = propagate(V, 11.0, 2048)
    sol = propagate(V, 30.0, 2048)
    T = cross_gram(V, 30.0, group_phi, solution=sol)
    assert np.array_equal(T.T[0], np.zeros((2, 2)))
    assert np.allclose(T.T[-1], cross_gram_boundary(group_phi, sol), atol=1e-7)


def test_cross_gram_keeps_imaginary_part():
    V = random_fourier(2, seed=3, amplitude=5.0)
    group_phi = propagate(V, 12.0, 2048)
    sol = propagate(V, 30.0, 2048)
    integrand = np.swapaxes(group_phi.phi, 1, 2).conj() @ sol.phi
    direct = trapezoid(integrand, x=sol.xs, axis=0)
    T = cross_gram(V, 30.0, group_phi, solution=sol).T[-1]
    assert np.max(np.abs(T.imag)) > 1e-2
    assert np.allclose(T, direct, atol=1e-6)


def test_free_cross_gram_values():
    V = ZeroPotential(2)
    group_phi = propagate(V, PI2, STEPS)
    at_alpha = cross_gram(V, PI2, group_phi, solution=group_phi).T[-1]
    assert np.allclose(at_alpha, np.eye(2) / (2 * PI2), atol=1e-10)
    # sin(pi x) and sin(2 pi x) are orthogonal on [0,1]
    assert np.allclose(cross_gram(V, 4 * PI2, group_phi).T[-1], 0.0, atol=1e-10)


def test_cross_gram_grid_mismatch():
    V = ZeroPotential(2)
    group_phi = propagate(V, PI2, 64)
    with pytest.raises(ContractViolationError):
        cross_gram(V, 5.0, group_phi, steps=128)
    with pytest.raises(ContractViolationError):
        cross_gram(V, 5.0, group_phi, solution=propagate(V, 5.0, 128))
    with pytest.raises(ContractViolationError):
        cross_gram_boundary(group_phi, group_phi)


def test_step_doubling_is_fourth_order():
    ratio = step_doubling_ratio(random_fourier(2, seed=0), PI2, 256)
    assert 14.0 < ratio < 18.0
    with pytest.raises(ContractViolationError):
        step_doubling_ratio(ZeroPotential(2), PI2, 18)
