"""
Small dense complex matrix and subspace algebra

Matrices are plain complex numpy arrays; subspaces are SubspaceBasis values
holding an orthonormal basis as the columns of an N x k array.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np
import scipy.linalg

from errors import ContractViolationError

HERMITIAN_RTOL = 1e-12


@dataclass(frozen=True)
class SubspaceBasis:
    """Orthonormal basis of a subspace of C^N (columns of ``vectors``)"""

    vectors: np.ndarray

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=complex)
        if vectors.ndim != 2:
            raise ContractViolationError(f"basis must be an N x k array, got shape {vectors.shape}")
        object.__setattr__(self, "vectors", vectors)

    @property
    def ambient_dim(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @classmethod
    def zero(cls, n: int) -> "SubspaceBasis":
        return cls(np.zeros((n, 0), dtype=complex))

    @classmethod
    def full(cls, n: int) -> "SubspaceBasis":
        return cls(np.eye(n, dtype=complex))

    @classmethod
    def span(cls, *vectors) -> "SubspaceBasis":
        """Orthonormal basis of the span of the given (not necessarily orthonormal) vectors"""
        columns = np.column_stack([np.asarray(v, dtype=complex) for v in vectors])
        return cls(scipy.linalg.orth(columns))


def as_matrix(M) -> np.ndarray:
    return np.atleast_2d(np.asarray(M, dtype=complex))


def frobenius(M: np.ndarray) -> float:
    return float(np.linalg.norm(M))


def hermitize(M: np.ndarray) -> np.ndarray:
    """Return (M + M*)/2; works on stacks of matrices"""
    return 0.5 * (M + np.swapaxes(M, -1, -2).conj())


def is_hermitian(M: np.ndarray, rtol: float = HERMITIAN_RTOL) -> bool:
    M = as_matrix(M)
    if M.shape[0] != M.shape[1]:
        return False
    return frobenius(M - M.conj().T) <= rtol * (1.0 + frobenius(M))


def _require_hermitian(M: np.ndarray) -> np.ndarray:
    M = as_matrix(M)
    if M.shape[0] != M.shape[1]:
        raise ContractViolationError(f"expected a square matrix, got shape {M.shape}")
    if not is_hermitian(M):
        raise ContractViolationError(
            f"expected a Hermitian matrix, asymmetry {frobenius(M - M.conj().T):.3e}"
        )
    return M


def hermitian_eig(M: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Eigen-decomposition of a Hermitian matrix

    Args:
        M: Hermitian matrix

    Returns:
        (eigenvalues ascending, orthonormal eigenvectors as columns)

    Raises:
        ContractViolationError: If M is not square or not Hermitian
    """
    M = _require_hermitian(M)
    eigenvalues, eigenvectors = scipy.linalg.eigh(hermitize(M))
    return eigenvalues, eigenvectors


def singular_values(M: np.ndarray) -> np.ndarray:
    """Singular values in descending order"""
    return scipy.linalg.svdvals(as_matrix(M))


def _threshold(sigma: np.ndarray, tol: float) -> float:
    # Relative to sigma_max with a floor of 1, so the test is scale-free for
    # small matrices and absolute for matrices that vanish altogether.
    sigma_max = float(sigma[0]) if sigma.size else 0.0
    return tol * max(sigma_max, 1.0)


def null_space(M: np.ndarray, tol: float) -> SubspaceBasis:
    """
    Orthonormal basis of the numerical kernel of M

    A right singular vector belongs to the kernel when its singular value is
    at most tol * max(sigma_max, 1). Columns beyond the row count of M are
    always in the kernel.
    """
    if not tol > 0:
        raise ContractViolationError(f"tol must be positive, got {tol}")
    M = as_matrix(M)
    _, sigma, vh = scipy.linalg.svd(M)
    n = M.shape[1]
    padded = np.zeros(n)
    padded[:sigma.size] = sigma
    keep = padded <= _threshold(sigma, tol)
    return SubspaceBasis(vh[keep].conj().T)


def smallest_singular_subspaces(M: np.ndarray, k: int) -> Tuple[SubspaceBasis, SubspaceBasis]:
    """
    Right and left singular subspaces of the k smallest singular values

    Used when the kernel dimension is known in advance: the right subspace
    approximates Ker M, the left one Ker M*.
    """
    M = as_matrix(M)
    if M.shape[0] != M.shape[1]:
        raise ContractViolationError(f"expected a square matrix, got shape {M.shape}")
    u, _, vh = scipy.linalg.svd(M)
    n = M.shape[0]
    return SubspaceBasis(vh[n - k:].conj().T), SubspaceBasis(u[:, n - k:])


def projector(E: SubspaceBasis) -> np.ndarray:
    """Orthogonal projector onto span(E)"""
    e = E.vectors
    return hermitize(e @ e.conj().T)


def subspace_complement(E: SubspaceBasis) -> SubspaceBasis:
    """Orthogonal complement of span(E) in C^N"""
    n = E.ambient_dim
    if E.dim == 0:
        return SubspaceBasis.full(n)
    if E.dim == n:
        return SubspaceBasis.zero(n)
    return SubspaceBasis(scipy.linalg.null_space(E.vectors.conj().T))


def subspace_image(M: np.ndarray, E: SubspaceBasis) -> SubspaceBasis:
    """
    Orthonormal basis of M(span E)

    Directions M kills are dropped: rank is decided with tolerance
    1e-10 * ||M||_2.
    """
    M = as_matrix(M)
    if M.shape[0] != M.shape[1] or M.shape[1] != E.ambient_dim:
        raise ContractViolationError(
            f"matrix shape {M.shape} incompatible with ambient dimension {E.ambient_dim}"
        )
    if E.dim == 0:
        return SubspaceBasis.zero(E.ambient_dim)
    image = M @ E.vectors
    u, sigma, _ = scipy.linalg.svd(image, full_matrices=False)
    norm = float(singular_values(M)[0]) if M.size else 0.0
    rank = int(np.sum(sigma > 1e-10 * norm)) if norm > 0 else 0
    return SubspaceBasis(u[:, :rank])


def principal_cosines(A: SubspaceBasis, B: SubspaceBasis) -> np.ndarray:
    """Cosines of the principal angles between span(A) and span(B), descending"""
    if A.ambient_dim != B.ambient_dim:
        raise ContractViolationError(
            f"ambient dimensions differ: {A.ambient_dim} vs {B.ambient_dim}"
        )
    if A.dim == 0 or B.dim == 0:
        return np.zeros(0)
    return np.clip(singular_values(A.vectors.conj().T @ B.vectors), 0.0, 1.0)


def intersection_dim(A: SubspaceBasis, B: SubspaceBasis, tol: float = 1e-8) -> int:
    """Number of principal angles whose cosine exceeds 1 - tol"""
    return int(np.sum(principal_cosines(A, B) > 1.0 - tol))


def subspace_distance(A: SubspaceBasis, B: SubspaceBasis) -> float:
    """
    Largest principal angle between two subspaces of equal dimension

    Subspaces of different dimension are at distance pi/2; two zero
    subspaces coincide.
    """
    if A.ambient_dim != B.ambient_dim:
        raise ContractViolationError(
            f"ambient dimensions differ: {A.ambient_dim} vs {B.ambient_dim}"
        )
    if A.dim != B.dim:
        return float(np.pi / 2)
    if A.dim == 0:
        return 0.0
    return float(np.max(scipy.linalg.subspace_angles(A.vectors, B.vectors)))


def min_principal_angle(A: SubspaceBasis, B: SubspaceBasis) -> float:
    """Smallest principal angle; pi/2 when either subspace is zero"""
    if A.dim == 0 or B.dim == 0:
        return float(np.pi / 2)
    return float(np.min(scipy.linalg.subspace_angles(A.vectors, B.vectors)))


def range_basis(M: np.ndarray, rel_tol: float) -> SubspaceBasis:
    """Range of a Hermitian matrix: eigenvectors with |mu| > rel_tol * max|mu|"""
    eigenvalues, eigenvectors = hermitian_eig(M)
    scale = float(np.max(np.abs(eigenvalues))) if eigenvalues.size else 0.0
    if scale == 0.0:
        return SubspaceBasis.zero(M.shape[0])
    return SubspaceBasis(eigenvectors[:, np.abs(eigenvalues) > rel_tol * scale])


def encode_matrix(M: np.ndarray) -> list:
    """Complex matrix (or vector) as nested lists of [re, im] pairs, row-major"""
    M = np.asarray(M, dtype=complex)
    pairs = np.stack([M.real, M.imag], axis=-1)
    return pairs.tolist()


def decode_matrix(data) -> np.ndarray:
    """Inverse of encode_matrix"""
    pairs = np.asarray(data, dtype=float)
    if pairs.shape[-1] != 2:
        raise ValueError(f"complex entries must be [re, im] pairs, got trailing shape {pairs.shape}")
    return pairs[..., 0] + 1j * pairs[..., 1]
