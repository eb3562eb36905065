"""
Spectral data of an eigenvalue group and the Weyl function m(lambda)

For a group (lambda_a, E_a) this attaches S_a = S(1, lambda_a), the norming
matrix g_a = e* S_a e, the residue matrix B_a = e g_a^{-1} e*, D_a = S_a^{-1} - B_a,
the forbidden subspace F_a, Z_a and E_a^sharp = Ker phi*(1, lambda_a).
m(lambda) = chi'(0, lambda) chi(0, lambda)^{-1} has residue -B_a at lambda_a.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Dict, Optional, Tuple

import numpy as np
import scipy.linalg

from config import CONCURRENCY_CONFIG, SPECTRAL_CONFIG
from errors import ContourGeometryError, ContractViolationError, InternalConsistencyError, NearPoleError
from matrix_core import (
    SubspaceBasis,
    hermitian_eig,
    hermitize,
    intersection_dim,
    null_space,
    projector,
    singular_values,
    smallest_singular_subspaces,
    subspace_complement,
    subspace_distance,
    subspace_image,
)
from potential import Potential
from propagator import chi_at, propagate, propagate_endpoint
from spectrum import EigenGroup, Spectrum
from utils.logging_config import get_logger

logger = get_logger(__name__)

DET_DELTAS = (1e-3, 1e-4, 1e-5)
POLE_DELTAS = (1e-3, 1e-4)


@dataclass(frozen=True)
class WeylSample:
    lam: complex
    m: np.ndarray


def attach_group_data(V: Potential, group: EigenGroup, steps: Optional[int] = None) -> EigenGroup:
    """
    Fill S_alpha, g_alpha, B_alpha, D_alpha, F_alpha, Z_alpha and E_sharp

    Raises:
        InternalConsistencyError: If e* S_alpha e is not positive definite
    """
    sol = propagate(V, group.lam, steps, with_lambda_derivative=True)
    S = sol.S[-1]
    phi1, dphi1, phidot1 = sol.phi[-1], sol.dphi[-1], sol.phidot[-1]
    e = group.e.vectors
    n, k = group.n, group.k

    g = hermitize(e.conj().T @ S @ e)
    g_eigenvalues = scipy.linalg.eigvalsh(g)
    if g_eigenvalues[0] <= 1e-14 * max(g_eigenvalues[-1], 1e-300):
        raise InternalConsistencyError(
            f"norming matrix at lambda={group.lam:.10g} is not positive definite "
            f"(eigenvalues {g_eigenvalues})"
        )
    B = hermitize(e @ np.linalg.solve(g, e.conj().T))
    D = hermitize(np.linalg.inv(S) - B)

    # Ker D_alpha = S_alpha(E_alpha) has dimension k; F_alpha is its complement
    _, D_vectors = hermitian_eig(D)
    F = SubspaceBasis(D_vectors[:, k:])

    P = group.P
    Z = phidot1 @ P + phi1 @ (np.eye(n) - P)
    _, E_sharp = smallest_singular_subspaces(phi1, k)

    logger.debug(f"Attached spectral data at lambda={group.lam:.10g} (k={k}, dim F={F.dim})")
    return replace(
        group,
        S_alpha=S,
        g_alpha=g,
        B_alpha=B,
        D_alpha=D,
        F_alpha=F,
        Z_alpha=Z,
        E_sharp=E_sharp,
        phi1=phi1,
        dphi1=dphi1,
        phidot1=phidot1,
    )


def attach_spectrum(
    V: Potential,
    spectrum: Spectrum,
    steps: Optional[int] = None,
    jobs: Optional[int] = None
) -> Spectrum:
    """attach_group_data for every group, threaded, order preserved"""
    jobs = CONCURRENCY_CONFIG["jobs"] if jobs is None else jobs
    with ThreadPoolExecutor(max_workers=jobs) as executor:
        groups = list(executor.map(lambda g: attach_group_data(V, g, steps), spectrum.groups))
    logger.info(f"Attached spectral data to {len(groups)} group(s)")
    return spectrum.with_groups(groups)


def _det_root_order(V: Potential, group: EigenGroup, steps: Optional[int]) -> Tuple[float, list]:
    deltas = np.array(DET_DELTAS)
    phi = propagate_endpoint(V, group.lam + deltas, steps).phi
    log_dets = np.log(np.abs(np.linalg.det(phi)))
    slopes = np.diff(log_dets) / np.diff(np.log(deltas))
    return float(np.max(np.abs(slopes - group.k))), slopes.tolist()


def _pole_expansion(V: Potential, group: EigenGroup, steps: Optional[int]) -> Tuple[float, list]:
    """
    Drift of C(delta) = phi(1, lambda_a + delta)^{-1} Z_a - (P / delta + P^perp) under delta -> delta / 10

    C(delta) = C_0 + O(delta), so the drift is relative to max(||C||, 1).
    A wrong leading term makes C grow like 1/delta and the drift O(1/delta).
    """
    deltas = np.array(POLE_DELTAS)
    phi = propagate_endpoint(V, group.lam + deltas, steps).phi
    P = group.P
    Q = np.eye(group.n) - P
    C = [np.linalg.solve(phi_d, group.Z_alpha) - (P / delta + Q) for phi_d, delta in zip(phi, deltas)]
    remainders = [float(np.linalg.norm(c, 2)) for c in C]
    drift = float(np.linalg.norm(C[0] - C[1], 2)) / max(remainders[1], 1.0)
    return drift, remainders


def group_checks(V: Potential, group: EigenGroup, steps: Optional[int] = None) -> Dict[str, Dict]:
    """
    Identities every attached group must satisfy, as named residuals

    Returns:
        {check name: {"residual": float, ...context}}
    """
    group.require_attached()
    n, k = group.n, group.k
    e = group.e.vectors
    P = group.P
    g = group.g_alpha
    checks: Dict[str, Dict] = {}

    # g from the lambda-derivative boundary values
    g_boundary = e.conj().T @ group.phidot1.conj().T @ group.dphi1 @ e
    checks["norming"] = {"residual": float(np.linalg.norm(g_boundary - g) / np.linalg.norm(g))}

    _, dchi0 = chi_at(V, group.lam, 0.0, steps)
    checks["boundary_identity"] = {"residual": float(np.linalg.norm(dchi0 @ group.dphi1 @ P - P))}

    P_sharp = projector(group.E_sharp)
    checks["boundary_identity_sharp"] = {
        "residual": float(np.linalg.norm(P_sharp @ group.dphi1 @ P - group.dphi1 @ P))
    }

    B_from_z = dchi0 @ np.linalg.solve(group.Z_alpha.conj().T, P)
    checks["residue_b_formula"] = {
        "residual": float(np.linalg.norm(B_from_z - group.B_alpha) / np.linalg.norm(group.B_alpha))
    }

    D_eigenvalues = scipy.linalg.eigvalsh(group.D_alpha)
    scale = max(float(np.max(np.abs(D_eigenvalues))), float(np.linalg.norm(np.linalg.inv(group.S_alpha), 2)))
    checks["d_alpha_psd"] = {
        "residual": max(0.0, -float(D_eigenvalues[0])) / scale,
        "min_eigenvalue": float(D_eigenvalues[0]),
    }

    numerical_kernel = null_space(group.D_alpha / scale, 1e-8)
    checks["forbidden_dim"] = {
        "residual": float(abs((n - numerical_kernel.dim) - (n - k))),
        "dim": n - numerical_kernel.dim,
    }

    checks["eigenspace_transversal"] = {"residual": float(intersection_dim(group.e, group.F_alpha))}

    image = subspace_image(group.phidot1.conj().T, group.E_sharp)
    F_cross = subspace_complement(image)
    checks["forbidden_cross_formula"] = {"residual": subspace_distance(group.F_alpha, F_cross)}

    sigma_z = singular_values(group.Z_alpha)
    checks["z_alpha_condition"] = {"residual": float(sigma_z[0] / sigma_z[-1]) if sigma_z[-1] > 0 else float("inf")}

    order_residual, slopes = _det_root_order(V, group, steps)
    checks["det_root_order"] = {"residual": order_residual, "slopes": slopes}

    pole_residual, remainders = _pole_expansion(V, group, steps)
    checks["pole_expansion"] = {"residual": pole_residual, "remainders": remainders}

    return checks


def weyl_m_batch(V: Potential, lams, steps: Optional[int] = None) -> np.ndarray:
    """m(lambda) for an array of (complex) lambda, no pole checks"""
    chi, dchi = chi_at(V, np.atleast_1d(np.asarray(lams, dtype=complex)), 0.0, steps)
    # m chi = chi'  <=>  chi^T m^T = chi'^T
    return np.swapaxes(np.linalg.solve(np.swapaxes(chi, 1, 2), np.swapaxes(dchi, 1, 2)), 1, 2)


def weyl_m(
    V: Potential,
    lam: complex,
    spectrum: Optional[Spectrum] = None,
    steps: Optional[int] = None
) -> WeylSample:
    """
    Weyl function m(lambda) = chi'(0) chi(0)^{-1}

    Raises:
        NearPoleError: If lambda is within pole_distance of a known eigenvalue
            or chi(0, lambda) is numerically singular
    """
    nearest = None
    if spectrum is not None and spectrum.groups:
        nearest = min(spectrum.lambdas, key=lambda value: abs(value - lam))
        if abs(nearest - lam) < SPECTRAL_CONFIG["pole_distance"]:
            raise NearPoleError(f"lambda={lam} is within {abs(nearest - lam):.1e} of eigenvalue {nearest:.10g}", nearest)

    chi, dchi = chi_at(V, lam, 0.0, steps)
    sigma = singular_values(chi)
    # Relative to max(sigma_max, 1): c * I with tiny c counts as singular
    condition = max(float(sigma[0]), 1.0) / float(sigma[-1]) if sigma[-1] > 0 else float("inf")
    if condition > SPECTRAL_CONFIG["chi_condition_limit"]:
        raise NearPoleError(f"chi(0, {lam}) is numerically singular (condition {condition:.2e})", nearest)
    m = np.linalg.solve(chi.T, dchi.T).T
    return WeylSample(lam=lam, m=m)


def m_residue(
    V: Potential,
    group: EigenGroup,
    radius: Optional[float] = None,
    nodes: Optional[int] = None,
    spectrum: Optional[Spectrum] = None,
    steps: Optional[int] = None
) -> np.ndarray:
    """
    Residue of m at lambda_alpha by the trapezoid rule on a circle

    R = (1 / 2 pi i) * contour integral of m = (r / nodes) * sum_j m(lambda_j) exp(i theta_j)

    Args:
        V: Potential
        group: Eigenvalue group
        radius: Circle radius (default radius factor times the nearest gap;
            needs ``spectrum``)
        nodes: Quadrature nodes, at least 32
        spectrum: Used for the default radius and the geometry check

    Raises:
        ContourGeometryError: If another eigenvalue lies within two radii
    """
    nodes = SPECTRAL_CONFIG["contour_nodes"] if nodes is None else nodes
    if nodes < 32:
        raise ContractViolationError(f"contour needs at least 32 nodes, got {nodes}")

    others = [] if spectrum is None else [lam for lam in spectrum.lambdas if abs(lam - group.lam) > 1e-9 * (1 + abs(lam))]
    gap = min((abs(lam - group.lam) for lam in others), default=float("inf"))
    if radius is None:
        if spectrum is None:
            raise ContractViolationError("default contour radius needs the spectrum")
        scale = gap if np.isfinite(gap) else np.pi * np.sqrt(max(abs(group.lam), np.pi**2))
        radius = SPECTRAL_CONFIG["contour_radius_factor"] * scale
    if not radius > 0:
        raise ContractViolationError(f"contour radius must be positive, got {radius}")
    if gap <= 2.0 * radius:
        raise ContourGeometryError(
            f"contour of radius {radius:.4g} around {group.lam:.8g} reaches the exclusion zone "
            f"of an eigenvalue {gap:.4g} away"
        )

    theta = 2.0 * np.pi * np.arange(nodes) / nodes
    circle = np.exp(1j * theta)
    m = weyl_m_batch(V, group.lam + radius * circle, steps)
    R = (radius / nodes) * np.einsum("j,jab->ab", circle, m)
    logger.debug(f"Contour residue at {group.lam:.10g}: radius {radius:.4g}, {nodes} nodes")
    return R


def residue_residuals(group: EigenGroup, R: np.ndarray) -> Dict[str, float]:
    """-R on E_alpha against g_alpha^{-1}, and R on the orthogonal complement"""
    group.require_attached()
    e = group.e.vectors
    g_inv = np.linalg.inv(group.g_alpha)
    on = float(np.linalg.norm(-(e.conj().T @ R @ e) - g_inv) / np.linalg.norm(g_inv))
    off = float(np.linalg.norm(R @ (np.eye(group.n) - group.P), 2))
    return {"residue_on_eigenspace": on, "residue_off_eigenspace": off}
