"""
Fundamental matrix solutions of -y'' + V(x) y = lambda y on [0,1]

phi(x, lambda) has phi(0) = 0, phi'(0) = I. The first-order system
Y' = F(x) Y with F = [[0, I], [V - lambda, 0]] is integrated by the classical
fourth-order Runge-Kutta method. Because the system is linear each step is a
fixed 2N x 2N matrix, so a whole trajectory is a prefix product of step
matrices and an endpoint is a single ordered product. Both are computed with
batched numpy matmuls instead of a Python loop over steps.
"""

from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from scipy.integrate import cumulative_simpson

from config import PROPAGATOR_CONFIG
from errors import ContractViolationError, DomainError
from matrix_core import hermitize
from potential import Potential, reflect
from utils.logging_config import get_logger

logger = get_logger(__name__)

Scalar = Union[float, complex]


@dataclass(frozen=True)
class MatrixSolution:
    """Trajectory of phi, phi' (and optionally d/dlambda of both) on a uniform grid"""

    lam: Scalar
    xs: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    S: np.ndarray
    phidot: Optional[np.ndarray] = None
    dphidot: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.phi.shape[1]

    @property
    def steps(self) -> int:
        return self.xs.size - 1


@dataclass(frozen=True)
class EndpointValues:
    """phi, phi' (and lambda-derivatives) at x_end for a batch of spectral parameters"""

    lams: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    phidot: Optional[np.ndarray] = None
    dphidot: Optional[np.ndarray] = None


@dataclass(frozen=True)
class ChiSolution:
    """chi(x, lambda) with chi(1) = 0, chi'(1) = I, on the same grid as propagate"""

    lam: Scalar
    xs: np.ndarray
    chi: np.ndarray
    dchi: np.ndarray


@dataclass(frozen=True)
class CrossGram:
    """T(x) = int_0^x phi_alpha*(t) phi(t, lambda) dt"""

    lam: Scalar
    lam_alpha: float
    xs: np.ndarray
    T: np.ndarray


def resolve_steps(steps: Optional[int]) -> int:
    if steps is None:
        steps = PROPAGATOR_CONFIG["steps"]
    if steps < 16 or steps % 2:
        raise ContractViolationError(f"steps must be even and >= 16, got {steps}")
    return steps


def _fine_samples(V: Potential, steps: int, x_end: float) -> np.ndarray:
    if x_end == 1.0:
        return V.samples(steps)
    return V.eval_many(np.linspace(0.0, x_end, 2 * steps + 1))


def _generator(samples: np.ndarray, lams: np.ndarray, with_derivative: bool) -> np.ndarray:
    """
    Coefficient matrix at every fine sample, batched over lambda

    State order is (phi, phi') or (phi, phi', phidot, phidot'); the
    lambda-derivative block couples through phidot'' = (V - lambda) phidot - phi.
    """
    n = samples.shape[1]
    eye = np.eye(n)
    F = np.zeros((lams.size, samples.shape[0], 2 * n, 2 * n), dtype=complex)
    F[..., :n, n:] = eye
    F[..., n:, :n] = samples[None] - lams[:, None, None, None] * eye
    if not with_derivative:
        return F

    G = np.zeros(F.shape[:2] + (4 * n, 4 * n), dtype=complex)
    G[..., :2 * n, :2 * n] = F
    G[..., 2 * n:, 2 * n:] = F
    G[..., 3 * n:, :n] = -eye
    return G


def _step_matrices(samples: np.ndarray, lams: np.ndarray, h: float, with_derivative: bool) -> np.ndarray:
    """One RK4 step as a matrix, shape (L, steps, d, d)"""
    F = _generator(samples, lams, with_derivative)
    F0, F1, F2 = F[:, 0:-1:2], F[:, 1::2], F[:, 2::2]
    eye = np.eye(F.shape[-1])
    P1 = F0
    P2 = F1 @ (eye + 0.5 * h * P1)
    P3 = F1 @ (eye + 0.5 * h * P2)
    P4 = F2 @ (eye + h * P3)
    return eye + (h / 6.0) * (P1 + 2.0 * P2 + 2.0 * P3 + P4)


def _ordered_product(M: np.ndarray) -> np.ndarray:
    """M[:, s-1] @ ... @ M[:, 0] by pairwise reduction"""
    Q = M
    while Q.shape[1] > 1:
        pairs = Q.shape[1] // 2
        reduced = Q[:, 1:2 * pairs:2] @ Q[:, 0:2 * pairs:2]
        if Q.shape[1] % 2:
            reduced = np.concatenate([reduced, Q[:, -1:]], axis=1)
        Q = reduced
    return Q[:, 0]


def _prefix_products(M: np.ndarray) -> np.ndarray:
    """Q[:, j] = M[:, j] @ ... @ M[:, 0] (Hillis-Steele scan)"""
    Q = M.copy()
    shift = 1
    while shift < Q.shape[1]:
        Q[:, shift:] = Q[:, shift:] @ Q[:, :-shift]
        shift *= 2
    return Q


def _running_integral(values: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Cumulative Simpson integral along axis 0, keeping complex values"""
    # cumulative_simpson allocates a real output array
    running = cumulative_simpson(values.real, x=xs, axis=0, initial=0)
    if np.iscomplexobj(values):
        running = running + 1j * cumulative_simpson(values.imag, x=xs, axis=0, initial=0)
    return running


def _chunk_size(samples: np.ndarray, with_derivative: bool) -> int:
    d = samples.shape[1] * (4 if with_derivative else 2)
    per_lambda = 6 * samples.shape[0] * d * d * 16
    return max(1, int(PROPAGATOR_CONFIG["lambda_chunk_bytes"] // per_lambda))


def propagate(
    V: Potential,
    lam: Scalar,
    steps: Optional[int] = None,
    with_lambda_derivative: bool = False,
    x_end: float = 1.0
) -> MatrixSolution:
    """
    Integrate the fundamental solution over [0, x_end]

    Args:
        V: Potential
        lam: Spectral parameter (complex values allowed)
        steps: Even number of RK4 steps (default from config)
        with_lambda_derivative: Also integrate phidot, phidot'
        x_end: Right end of the integration interval

    Returns:
        MatrixSolution on the uniform grid with steps + 1 nodes; S is the
        running Simpson integral of phi* phi
    """
    steps = resolve_steps(steps)
    if not 0.0 < x_end <= 1.0:
        raise DomainError(f"x_end must lie in (0, 1], got {x_end}")

    n = V.n
    samples = _fine_samples(V, steps, x_end)
    M = _step_matrices(samples, np.array([lam], dtype=complex), x_end / steps, with_lambda_derivative)
    Q = _prefix_products(M)[0]
    d = Q.shape[-1]
    trajectory = np.concatenate([np.eye(d, dtype=complex)[None], Q], axis=0)

    xs = np.linspace(0.0, x_end, steps + 1)
    phi = trajectory[:, :n, n:2 * n]
    dphi = trajectory[:, n:2 * n, n:2 * n]
    phidot = dphidot = None
    if with_lambda_derivative:
        phidot = trajectory[:, 2 * n:3 * n, n:2 * n]
        dphidot = trajectory[:, 3 * n:, n:2 * n]

    gram = np.swapaxes(phi, 1, 2).conj() @ phi
    S = hermitize(_running_integral(gram, xs))

    return MatrixSolution(lam=lam, xs=xs, phi=phi, dphi=dphi, S=S, phidot=phidot, dphidot=dphidot)


def propagate_endpoint(
    V: Potential,
    lams,
    steps: Optional[int] = None,
    with_lambda_derivative: bool = False,
    x_end: float = 1.0
) -> EndpointValues:
    """
    phi(x_end, lambda), phi'(x_end, lambda) for an array of spectral parameters

    Only the ordered product of step matrices is formed, so this is much
    cheaper than a full trajectory. Large batches are processed in chunks.
    """
    steps = resolve_steps(steps)
    lams = np.atleast_1d(np.asarray(lams, dtype=complex))
    n = V.n
    samples = _fine_samples(V, steps, x_end)
    chunk = _chunk_size(samples, with_lambda_derivative)

    products = []
    for start in range(0, lams.size, chunk):
        M = _step_matrices(samples, lams[start:start + chunk], x_end / steps, with_lambda_derivative)
        products.append(_ordered_product(M))
    Q = np.concatenate(products, axis=0)

    return EndpointValues(
        lams=lams,
        phi=Q[:, :n, n:2 * n],
        dphi=Q[:, n:2 * n, n:2 * n],
        phidot=Q[:, 2 * n:3 * n, n:2 * n] if with_lambda_derivative else None,
        dphidot=Q[:, 3 * n:, n:2 * n] if with_lambda_derivative else None,
    )


def chi_at(V: Potential, lam, x: float = 0.0, steps: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    (chi(x, lambda), chi'(x, lambda)) through chi(x, V) = -phi(1 - x, V reflected)

    ``lam`` may be a scalar or an array; arrays give stacked results.
    """
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"chi evaluated outside [0,1]: x={x}")
    lams = np.atleast_1d(np.asarray(lam, dtype=complex))

    if x == 1.0:
        chi = np.zeros((lams.size, V.n, V.n), dtype=complex)
        dchi = np.broadcast_to(np.eye(V.n, dtype=complex), chi.shape).copy()
    else:
        endpoint = propagate_endpoint(reflect(V), lams, steps, x_end=1.0 - x)
        chi, dchi = -endpoint.phi, endpoint.dphi

    if np.ndim(lam) == 0:
        return chi[0], dchi[0]
    return chi, dchi


def chi_solution(V: Potential, lam: Scalar, steps: Optional[int] = None) -> ChiSolution:
    """chi and chi' on the full propagation grid (reflected trajectory read backwards)"""
    reflected = propagate(reflect(V), lam, steps)
    return ChiSolution(
        lam=lam,
        xs=reflected.xs,
        chi=-reflected.phi[::-1],
        dchi=reflected.dphi[::-1],
    )


def cross_gram(
    V: Potential,
    lam: Scalar,
    group_phi: MatrixSolution,
    steps: Optional[int] = None,
    solution: Optional[MatrixSolution] = None
) -> CrossGram:
    """
    Running integral T(x, lambda) of phi_alpha* phi(., lambda)

    Args:
        V: Potential both solutions belong to
        lam: Spectral parameter of the second factor
        group_phi: Solution at lambda_alpha
        steps: Step count; must match the grid of group_phi
        solution: Already propagated solution at lam (skips propagation)

    Raises:
        ContractViolationError: If the grids differ
    """
    steps = group_phi.steps if steps is None else resolve_steps(steps)
    if steps != group_phi.steps:
        raise ContractViolationError(
            f"cross Gram grid mismatch: {steps} steps vs {group_phi.steps} in the group solution"
        )
    if solution is None:
        solution = propagate(V, lam, steps)
    elif solution.steps != steps or not np.array_equal(solution.xs, group_phi.xs):
        raise ContractViolationError("cross Gram grid mismatch between the two solutions")

    integrand = np.swapaxes(group_phi.phi, 1, 2).conj() @ solution.phi
    T = _running_integral(integrand, group_phi.xs)
    return CrossGram(lam=lam, lam_alpha=float(np.real(group_phi.lam)), xs=group_phi.xs, T=T)


def cross_gram_boundary(group_phi: MatrixSolution, solution: MatrixSolution) -> np.ndarray:
    """T(1, lambda) from boundary values: [phi_a* phi' - phi_a'* phi](1) / (lambda_a - lambda)"""
    delta = complex(group_phi.lam) - complex(solution.lam)
    if delta == 0:
        raise ContractViolationError("boundary formula needs lambda != lambda_alpha")
    phi_a, dphi_a = group_phi.phi[-1], group_phi.dphi[-1]
    return (phi_a.conj().T @ solution.dphi[-1] - dphi_a.conj().T @ solution.phi[-1]) / delta


def step_doubling_ratio(V: Potential, lam: Scalar, steps: Optional[int] = None) -> float:
    """
    ||phi_{2h}(1) - phi_h(1)|| / ||phi_h(1) - phi_{h/2}(1)||

    About 16 for a fourth-order method on smooth V; ``steps`` is the middle
    resolution h and must be divisible by 4.
    """
    steps = resolve_steps(steps)
    if steps % 4:
        raise ContractViolationError(f"step doubling needs steps divisible by 4, got {steps}")
    coarse, middle, fine = (
        propagate_endpoint(V, [lam], s).phi[0] for s in (steps // 2, steps, 2 * steps)
    )
    denominator = float(np.linalg.norm(middle - fine))
    if denominator == 0.0:
        return float("inf")
    return float(np.linalg.norm(coarse - middle)) / denominator
