"""
Dirichlet eigenvalues with multiplicities

Finite-difference eigenvalues seed the search, clusters of nearly equal
guesses are merged, and each cluster is refined to a minimizer of
sigma_min(phi(1, lambda)). The multiplicity is the dimension of the
numerical kernel of phi(1, lambda) at the refined value.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy.linalg import eig_banded
from scipy.optimize import minimize_scalar

from config import CONCURRENCY_CONFIG, PROPAGATOR_CONFIG, SOLVER_CONFIG
from errors import ContractViolationError, NotAnEigenvalueError, PartialSpectrumError
from matrix_core import SubspaceBasis, null_space, projector
from potential import Potential
from propagator import propagate_endpoint, resolve_steps, step_doubling_ratio
from utils.logging_config import get_logger
from utils.retry import retry_widening

logger = get_logger(__name__)


@dataclass(frozen=True)
class EigenGroup:
    """
    One eigenvalue with its eigenspace E = Ker phi(1, lambda)

    The optional fields are filled by spectral_data.attach_group_data; g_alpha
    is expressed in the basis ``e.vectors``.
    """

    lam: float
    k: int
    e: SubspaceBasis
    S_alpha: Optional[np.ndarray] = None
    g_alpha: Optional[np.ndarray] = None
    B_alpha: Optional[np.ndarray] = None
    D_alpha: Optional[np.ndarray] = None
    F_alpha: Optional[SubspaceBasis] = None
    Z_alpha: Optional[np.ndarray] = None
    E_sharp: Optional[SubspaceBasis] = None
    phi1: Optional[np.ndarray] = None
    dphi1: Optional[np.ndarray] = None
    phidot1: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.e.ambient_dim

    @property
    def P(self) -> np.ndarray:
        return projector(self.e)

    @property
    def attached(self) -> bool:
        return self.B_alpha is not None

    def require_attached(self) -> "EigenGroup":
        if not self.attached:
            raise ContractViolationError(
                f"eigenvalue group at lambda={self.lam:.10g} has no spectral data attached"
            )
        return self


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalue groups below a cutoff, strictly increasing in lambda"""

    groups: Tuple[EigenGroup, ...]
    lambda_max: float
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    @property
    def lambdas(self) -> List[float]:
        return [g.lam for g in self.groups]

    @property
    def multiplicities(self) -> List[int]:
        return [g.k for g in self.groups]

    def group(self, alpha: int) -> EigenGroup:
        """Group by 1-based index"""
        if not 1 <= alpha <= len(self.groups):
            raise ContractViolationError(
                f"alpha={alpha} out of range: {len(self.groups)} group(s) below lambda_max={self.lambda_max}"
            )
        return self.groups[alpha - 1]

    def nearest_gap(self, alpha: int) -> float:
        """Distance from group alpha to its closest neighbour (inf when alone)"""
        lam = self.group(alpha).lam
        others = [abs(g.lam - lam) for i, g in enumerate(self.groups, 1) if i != alpha]
        return min(others) if others else float("inf")

    def with_groups(self, groups) -> "Spectrum":
        return replace(self, groups=tuple(groups))


def coarse_spectrum(V: Potential, lambda_max: Optional[float] = None, mesh: Optional[int] = None) -> np.ndarray:
    """
    Eigenvalues of the block-tridiagonal finite-difference Dirichlet operator

    Uses the mesh-1 interior nodes; the Hermitian band matrix has half
    bandwidth N and only eigenvalues up to lambda_max are computed. Nearly
    equal values are kept (no dedup here).
    """
    lambda_max = SOLVER_CONFIG["lambda_max"] if lambda_max is None else lambda_max
    mesh = SOLVER_CONFIG["mesh"] if mesh is None else mesh
    if mesh < 64:
        raise ContractViolationError(f"mesh must be >= 64, got {mesh}")

    n = V.n
    h = 1.0 / mesh
    nodes = np.arange(1, mesh) / mesh
    values = V.eval_many(nodes)
    size = (mesh - 1) * n

    # Lower band storage: band[r - c, c] = A[r, c]
    band = np.zeros((n + 1, size), dtype=complex)
    for r in range(n):
        for c in range(r + 1):
            band[r - c, c::n] = values[:, r, c] + (2.0 / h**2 if r == c else 0.0)
    band[n, :size - n] = -1.0 / h**2

    floor = -float(np.max(np.abs(values))) * n - 1.0
    eigenvalues = eig_banded(band, lower=True, eigvals_only=True, select="v", select_range=(floor, lambda_max))
    logger.debug(f"Finite differences (mesh {mesh}): {eigenvalues.size} value(s) up to {lambda_max:.4g}")
    return np.sort(eigenvalues)


def debias_guesses(V: Potential, guesses: np.ndarray, mesh: int) -> np.ndarray:
    """
    Remove the O(h^2) bias of finite-difference eigenvalues

    The three-point Dirichlet Laplacian has eigenvalues (4/h^2) sin^2(z h/2)
    instead of z^2. Inverting that relation around the mean diagonal level
    of V puts the guesses within O(h^2 lambda ||V - mean||) of the true
    values.
    """
    if guesses.size == 0:
        return guesses
    h = 1.0 / mesh
    shift = float(np.real(np.trace(V.integral()))) / V.n
    free = guesses - shift
    positive = free > 0
    corrected = guesses.copy()
    argument = np.clip(0.5 * h * np.sqrt(free[positive]), 0.0, 1.0)
    corrected[positive] = shift + (2.0 / h * np.arcsin(argument)) ** 2
    return corrected


def sigma_scan(V: Potential, lams, steps: Optional[int] = None) -> np.ndarray:
    """Singular values of phi(1, lambda) for each lambda, shape (L, N), descending"""
    endpoint = propagate_endpoint(V, lams, steps)
    return np.linalg.svd(endpoint.phi, compute_uv=False)


def _relative_sigma_min(sigma: np.ndarray) -> np.ndarray:
    return sigma[..., -1] / np.maximum(sigma[..., 0], 1.0)


def _default_half_width(guess: float) -> float:
    # Roughly half the free spacing pi * sqrt(lambda) around the guess
    return 0.5 * np.pi * np.sqrt(max(abs(guess), np.pi**2))


@retry_widening("half_width", exceptions=(NotAnEigenvalueError,))
def refine_eigenvalue(
    V: Potential,
    guess: float,
    half_width: Optional[float] = None,
    steps: Optional[int] = None,
    tol: Optional[float] = None
) -> float:
    """
    Refine an eigenvalue guess to a minimizer of sigma_min(phi(1, lambda))

    A batched scan over [guess - half_width, guess + half_width] picks the
    best sample; bounded Brent searches around it finish.
    The bracket widens on failure (see utils.retry).

    Args:
        V: Potential
        guess: Initial guess within half a spectral gap of the eigenvalue
        half_width: Half width of the search bracket (default from the
            free spacing at the guess)
        steps: Integration steps
        tol: Acceptance threshold on sigma_min / max(sigma_max, 1)

    Returns:
        Refined eigenvalue

    Raises:
        NotAnEigenvalueError: If no sample in the bracket reaches the threshold
    """
    tol = SOLVER_CONFIG["refine_tol"] if tol is None else tol
    if half_width is None:
        half_width = _default_half_width(guess)
    bracket = (guess - half_width, guess + half_width)

    lams = np.linspace(bracket[0], bracket[1], SOLVER_CONFIG["scan_points"])
    objective_values = _relative_sigma_min(sigma_scan(V, lams, steps))
    best = int(np.argmin(objective_values))
    lam, value = float(lams[best]), float(objective_values[best])
    spacing = float(lams[1] - lams[0])

    def objective(lam: float) -> float:
        return float(_relative_sigma_min(sigma_scan(V, [lam], steps))[0])

    # Bounded Brent stops at sqrt(eps) * |x|, so search the offset from the
    # current best point, then once more in a much narrower window.
    for width in (spacing, 1e-5 * max(spacing, 1.0)):
        result = minimize_scalar(
            lambda t, center=lam: objective(center + t),
            bounds=(-width, width),
            method="bounded",
            options={"xatol": 1e-13 * max(1.0, abs(guess)), "maxiter": 500},
        )
        if float(result.fun) <= value:
            lam, value = lam + float(result.x), float(result.fun)

    logger.debug(
        f"Refined {guess:.8g} -> {lam:.12g} (sigma_min ratio {value:.2e}, "
        f"bracket [{bracket[0]:.6g}, {bracket[1]:.6g}])"
    )
    if value > tol:
        raise NotAnEigenvalueError(
            f"no eigenvalue near {guess:.8g}: sigma_min ratio {value:.2e} > {tol:.1e}",
            guess=guess,
            bracket=bracket,
        )
    return lam


def multiplicity_and_kernel(
    V: Potential,
    lam: float,
    sv_tol: Optional[float] = None,
    steps: Optional[int] = None
) -> Tuple[int, SubspaceBasis]:
    """
    Multiplicity and eigenspace at a refined eigenvalue

    Raises:
        NotAnEigenvalueError: If phi(1, lambda) has no numerical kernel
    """
    sv_tol = SOLVER_CONFIG["sv_tol"] if sv_tol is None else sv_tol
    phi1 = propagate_endpoint(V, [lam], steps).phi[0]
    e = null_space(phi1, sv_tol)
    if e.dim == 0:
        raise NotAnEigenvalueError(f"phi(1, {lam:.10g}) has trivial kernel at sv_tol={sv_tol:.1e}", guess=lam)
    return e.dim, e


def locate_group(
    V: Potential,
    guess: float,
    half_width: Optional[float] = None,
    steps: Optional[int] = None,
    sv_tol: Optional[float] = None
) -> EigenGroup:
    """Refine one eigenvalue and return its group (without attached data)"""
    lam = refine_eigenvalue(V, guess, half_width=half_width, steps=steps)
    k, e = multiplicity_and_kernel(V, lam, sv_tol=sv_tol, steps=steps)
    return EigenGroup(lam=lam, k=k, e=e)


def _cluster(guesses: np.ndarray, cluster_tol: float) -> List[np.ndarray]:
    clusters: List[List[float]] = []
    for value in guesses:
        if clusters and value - clusters[-1][-1] < cluster_tol * (1.0 + abs(value)):
            clusters[-1].append(value)
        else:
            clusters.append([value])
    return [np.array(c) for c in clusters]


def _half_widths(centers: List[float]) -> List[Optional[float]]:
    widths = []
    for i, center in enumerate(centers):
        gaps = []
        if i > 0:
            gaps.append(center - centers[i - 1])
        if i + 1 < len(centers):
            gaps.append(centers[i + 1] - center)
        widths.append(0.5 * min(gaps) if gaps else None)
    return widths


def compute_spectrum(
    V: Potential,
    lambda_max: Optional[float] = None,
    mesh: Optional[int] = None,
    steps: Optional[int] = None,
    sv_tol: Optional[float] = None,
    cluster_tol: Optional[float] = None,
    jobs: Optional[int] = None
) -> Spectrum:
    """
    All eigenvalue groups with lambda <= lambda_max

    Pipeline: finite differences up to lambda_max * margin with the h^2 bias
    removed, clustering by relative gap, one refinement per cluster
    (threaded), dedup of refined values, multiplicity from the kernel
    dimension.

    Raises:
        PartialSpectrumError: If any cluster fails to refine; carries the
            groups that succeeded
    """
    lambda_max = SOLVER_CONFIG["lambda_max"] if lambda_max is None else lambda_max
    mesh = SOLVER_CONFIG["mesh"] if mesh is None else mesh
    steps = resolve_steps(steps)
    sv_tol = SOLVER_CONFIG["sv_tol"] if sv_tol is None else sv_tol
    cluster_tol = SOLVER_CONFIG["cluster_tol"] if cluster_tol is None else cluster_tol
    jobs = CONCURRENCY_CONFIG["jobs"] if jobs is None else jobs

    guesses = coarse_spectrum(V, lambda_max * SOLVER_CONFIG["lambda_max_margin"], mesh)
    clusters = _cluster(debias_guesses(V, guesses, mesh), cluster_tol)
    centers = [float(np.mean(c)) for c in clusters]
    widths = _half_widths(centers)
    logger.info(f"{guesses.size} finite-difference guess(es) in {len(clusters)} cluster(s)")

    def refine(index: int):
        try:
            return index, locate_group(V, centers[index], half_width=widths[index], steps=steps, sv_tol=sv_tol), None
        except NotAnEigenvalueError as e:
            return index, None, str(e)

    with ThreadPoolExecutor(max_workers=jobs) as executor:
        outcomes = list(executor.map(refine, range(len(clusters))))

    # Deterministic ordered reduce
    fd_noise = 16 * np.finfo(float).eps * 4.0 * mesh**2
    groups: List[EigenGroup] = []
    cluster_info: List[Dict[str, Any]] = []
    failed: List[Dict[str, Any]] = []
    refined = []
    for index, group, error in outcomes:
        if group is None:
            failed.append({"center": centers[index], "guesses": int(clusters[index].size), "error": error})
            logger.warning(f"Cluster at {centers[index]:.8g} failed to refine: {error}")
        else:
            refined.append((group.lam, index, group))

    for _, index, group in sorted(refined, key=lambda item: (item[0], item[1])):
        cluster = clusters[index]
        if groups and abs(group.lam - groups[-1].lam) < cluster_tol * (1.0 + abs(group.lam)):
            previous = cluster_info[-1]
            previous["guesses"] += int(cluster.size)
            previous["merged"] = True
            logger.warning(
                f"Clusters at {previous['center']:.8g} and {centers[index]:.8g} refined to the same value "
                f"{group.lam:.12g}; reported as one group"
            )
            continue
        spread = float(cluster.max() - cluster.min())
        merged = cluster.size > 1 and spread > fd_noise
        if merged:
            logger.warning(
                f"Cluster at {group.lam:.8g} merges {cluster.size} distinct guesses (spread {spread:.2e})"
            )
        groups.append(group)
        cluster_info.append({
            "lambda": group.lam,
            "center": centers[index],
            "guesses": int(cluster.size),
            "spread": spread,
            "merged": merged,
        })

    keep = [i for i, g in enumerate(groups) if g.lam <= lambda_max]
    groups = [groups[i] for i in keep]
    cluster_info = [cluster_info[i] for i in keep]

    diagnostics = {
        "steps": steps,
        "mesh": mesh,
        "sv_tol": sv_tol,
        "cluster_tol": cluster_tol,
        "refine_tol": SOLVER_CONFIG["refine_tol"],
        "clusters": cluster_info,
        "fd_guesses": [float(v) for v in guesses if v <= lambda_max],
        "weyl_count": _weyl_count(V, groups, lambda_max),
    }
    if groups and steps % 4 == 0:
        check_steps = max(64, steps // 16)
        check_steps -= check_steps % 4
        diagnostics["step_doubling"] = {
            "steps": check_steps,
            "lambda": groups[0].lam,
            "ratio": step_doubling_ratio(V, groups[0].lam, check_steps),
        }

    spectrum = Spectrum(groups=tuple(groups), lambda_max=lambda_max, diagnostics=diagnostics)
    if failed:
        raise PartialSpectrumError(
            f"{len(failed)} of {len(clusters)} cluster(s) failed to refine", partial=spectrum, failed=failed
        )
    logger.info(
        "Spectrum: " + ", ".join(f"({g.lam:.8g}, k={g.k})" for g in groups) if groups else "Spectrum: empty"
    )
    return spectrum


def _weyl_count(V: Potential, groups: List[EigenGroup], lambda_max: float) -> Dict[str, Any]:
    """Sum of multiplicities below (pi n)^2 + ||V|| against N n, within +-N"""
    norm = V.sup_norm()
    n_modes = int(np.floor(np.sqrt(max(lambda_max - norm, 0.0)) / np.pi))
    threshold = (np.pi * n_modes) ** 2 + norm
    count = sum(g.k for g in groups if g.lam <= threshold)
    expected = V.n * n_modes
    return {
        "modes": n_modes,
        "threshold": threshold,
        "count": count,
        "expected": expected,
        "consistent": abs(count - expected) <= V.n,
    }
