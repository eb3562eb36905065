"""
Test matrix and subspace algebra for isospec
"""

import numpy as np
import pytest

from errors import ContractViolationError
from matrix_core import (
    SubspaceBasis,
    decode_matrix,
    encode_matrix,
    hermitian_eig,
    intersection_dim,
    is_hermitian,
    min_principal_angle,
    null_space,
    projector,
    range_basis,
    singular_values,
    smallest_singular_subspaces,
    subspace_complement,
    subspace_distance,
    subspace_image,
)


def random_hermitian(n, seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (M + M.conj().T)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_hermitian_eig_reconstructs(seed):
    M = random_hermitian(4, seed)
    mu, v = hermitian_eig(M)
    assert np.all(np.diff(mu) >= 0)
    assert np.allclose(v.conj().T @ v, np.eye(4), atol=1e-10)
    assert np.linalg.norm(v @ np.diag(mu) @ v.conj().T - M) <= 1e-9 * (1 + np.linalg.norm(M))


def test_hermitian_eig_rejects_non_hermitian():
    with pytest.raises(ContractViolationError):
        hermitian_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_is_hermitian_tolerance():
    M = random_hermitian(3, 5)
    assert is_hermitian(M)
    M[0, 1] += 1e-6
    assert not is_hermitian(M)


def test_singular_values_match_eigenvalues_of_gram():
    rng = np.random.default_rng(3)
    M = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    sigma = singular_values(M)
    mu, _ = hermitian_eig(M.conj().T @ M)
    assert np.allclose(sigma**2, mu[::-1], atol=1e-10)


def test_null_space_examples():
    assert null_space(np.zeros((2, 2)), 1e-8).dim == 2

    kernel = null_space(np.diag([1.0, 0.0]), 1e-8)
    assert kernel.dim == 1
    assert abs(abs(kernel.vectors[1, 0]) - 1.0) < 1e-12

    phi1 = np.sin(np.pi) / np.pi * np.eye(2)
    assert null_space(phi1, 1e-6).dim == 2

    with pytest.raises(ContractViolationError):
        null_space(np.eye(2), 0.0)


def test_smallest_singular_subspaces():
    M = np.diag([3.0, 1e-12, 2.0])
    right, left = smallest_singular_subspaces(M, 1)
    assert right.dim == left.dim == 1
    assert abs(abs(right.vectors[1, 0]) - 1.0) < 1e-12
    assert abs(abs(left.vectors[1, 0]) - 1.0) < 1e-12


def test_projector_and_complement():
    E = SubspaceBasis.span([1.0, 1.0, 0.0], [0.0, 1j, 1.0])
    P = projector(E)
    assert np.allclose(P @ P, P, atol=1e-10)
    assert np.allclose(P, P.conj().T, atol=1e-12)

    C = subspace_complement(E)
    assert C.dim == 1
    assert np.allclose(E.vectors.conj().T @ C.vectors, 0.0, atol=1e-10)
    assert np.allclose(P + projector(C), np.eye(3), atol=1e-9)

    assert subspace_complement(SubspaceBasis.zero(2)).dim == 2
    assert subspace_complement(SubspaceBasis.full(2)).dim == 0


def test_subspace_image_drops_killed_directions():
    M = np.diag([2.0, 0.0])
    image = subspace_image(M, SubspaceBasis.full(2))
    assert image.dim == 1
    assert subspace_distance(image, SubspaceBasis.span([1.0, 0.0])) < 1e-12

    assert subspace_image(M, SubspaceBasis.span([0.0, 1.0])).dim == 0


def test_principal_angle_helpers():
    e1 = SubspaceBasis.span([1.0, 0.0])
    e2 = SubspaceBasis.span([0.0, 1.0])
    u = SubspaceBasis.span([np.cos(np.pi / 6), np.sin(np.pi / 6)])

    assert intersection_dim(e1, e1) == 1
    assert intersection_dim(e1, e2) == 0
    assert subspace_distance(e1, e2) == pytest.approx(np.pi / 2)
    assert min_principal_angle(u, e1) == pytest.approx(np.pi / 6)
    assert subspace_distance(e1, SubspaceBasis.full(2)) == pytest.approx(np.pi / 2)
    assert subspace_distance(SubspaceBasis.zero(2), SubspaceBasis.zero(2)) == 0.0
    assert min_principal_angle(SubspaceBasis.zero(2), e1) == pytest.approx(np.pi / 2)


def test_range_basis():
    u = np.array([np.cos(np.pi / 6), np.sin(np.pi / 6)])
    E = range_basis(4 * np.pi**2 * np.outer(u, u), 1e-8)
    assert E.dim == 1
    assert subspace_distance(E, SubspaceBasis.span(u)) < 1e-10
    assert range_basis(np.zeros((2, 2)), 1e-8).dim == 0


def test_encode_decode():
    M = np.array([[1 + 2j, -0.5], [3j, 4.0]])
    encoded = encode_matrix(M)
    assert encoded[0][0] == [1.0, 2.0]
    assert np.array_equal(decode_matrix(encoded), M)

    with pytest.raises(ValueError):
        decode_matrix([[1.0, 2.0, 3.0]])
