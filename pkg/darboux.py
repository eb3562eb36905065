"""
Isospectral Darboux transforms

Given an attached eigenvalue group alpha of V and a target residue matrix B,
the transformed potential is

    V~(x) = V(x) - 2 [phi_a K phi_a*]'(x),   K(x) = A (I + S_a(x) A)^{-1},   A = B - B_a

with phi_a = phi(., lambda_a). Using K' = -K phi_a* phi_a K the derivative is
expanded in closed form, so no numerical differentiation is involved. V~ has
the spectrum of V, the alpha-th residue matrix B and all other residue
matrices unchanged.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, Field, ValidationError
from scipy.interpolate import CubicHermiteSpline

from config import PROPAGATOR_CONFIG, SOLVER_CONFIG, TRANSFORM_CONFIG
from errors import (
    CompositionError,
    ContractViolationError,
    InvalidNormingError,
    NumericalConditioningError,
    PotentialFormatError,
    RejectedTargetError,
)
from matrix_core import (
    SubspaceBasis,
    as_matrix,
    decode_matrix,
    encode_matrix,
    hermitize,
    intersection_dim,
    is_hermitian,
    min_principal_angle,
    range_basis,
    singular_values,
)
from potential import Potential, materialize
from propagator import MatrixSolution, cross_gram, propagate
from spectral_data import attach_group_data
from spectrum import EigenGroup, compute_spectrum
from utils.logging_config import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class TransformSpec:
    """One isospectral move: target residue matrix B for the group with 1-based index alpha"""

    alpha: int
    B: np.ndarray

    def __post_init__(self):
        if self.alpha < 1:
            raise ContractViolationError(f"alpha is 1-based, got {self.alpha}")
        B = as_matrix(self.B)
        if B.shape[0] != B.shape[1]:
            raise ContractViolationError(f"B must be square, got shape {B.shape}")
        object.__setattr__(self, "B", B)

    @property
    def target_space(self) -> SubspaceBasis:
        """E^(B), the orthogonal complement of Ker B"""
        return range_basis(hermitize(self.B), TRANSFORM_CONFIG["rank_tol"])

    def to_payload(self) -> Dict:
        return {"alpha": self.alpha, "B": encode_matrix(self.B)}


@dataclass(frozen=True)
class TargetDiagnostics:
    """Outcome of validate_target: one flag per condition plus measured margins"""

    conditions: Dict[str, bool]
    margins: Dict[str, float]

    @property
    def passed(self) -> bool:
        return all(self.conditions.values())

    @property
    def failed(self) -> List[str]:
        return [name for name, ok in self.conditions.items() if not ok]


@dataclass(frozen=True)
class TransformCache:
    """phi_a, phi_a', S_a(x) and K(x) on the cache grid"""

    xs: np.ndarray
    lam_alpha: float
    A: np.ndarray
    phi_a: np.ndarray
    dphi_a: np.ndarray
    S_a: np.ndarray
    K: np.ndarray
    solution: MatrixSolution
    max_condition: float
    k_hermitian_residual: float
    boundary_kernel_norm: float
    diagnostics: Dict[str, float] = field(default_factory=dict)

    @property
    def steps(self) -> int:
        return self.xs.size - 1


def target_from_pair(E: SubspaceBasis, g) -> np.ndarray:
    """
    B = e g^{-1} e* for an orthonormal basis e of E

    Raises:
        InvalidNormingError: If g is not Hermitian positive definite
    """
    g = as_matrix(g)
    if g.shape != (E.dim, E.dim):
        raise ContractViolationError(f"norming matrix shape {g.shape} does not match dim E = {E.dim}")
    if not is_hermitian(g, rtol=1e-10):
        raise InvalidNormingError("norming matrix is not Hermitian")
    eigenvalues = np.linalg.eigvalsh(hermitize(g))
    if eigenvalues[0] <= 1e-14 * max(abs(eigenvalues[-1]), 1e-300):
        raise InvalidNormingError(f"norming matrix is not positive definite (eigenvalues {eigenvalues})")
    e = E.vectors
    return hermitize(e @ np.linalg.solve(hermitize(g), e.conj().T))


def pair_from_target(B) -> tuple:
    """(E^(B), g) with B = e g^{-1} e*; inverse of target_from_pair"""
    B = hermitize(as_matrix(B))
    E = range_basis(B, TRANSFORM_CONFIG["rank_tol"])
    e = E.vectors
    return E, hermitize(np.linalg.inv(e.conj().T @ B @ e))


def validate_target(spec: TransformSpec, group: EigenGroup, raise_on_failure: bool = True) -> TargetDiagnostics:
    """
    Check B against the admissibility conditions for group alpha

    Conditions, in order: hermitian, positive_semidefinite, rank (= k_alpha),
    rank_margin (smallest retained singular value not too close to zero)
    and transversality (E^(B) meets F_alpha only in 0).

    Raises:
        RejectedTargetError: Naming the first failed condition
    """
    group.require_attached()
    B = spec.B
    if B.shape != (group.n, group.n):
        raise ContractViolationError(f"B has shape {B.shape}, potential has N={group.n}")

    norm = float(np.linalg.norm(B, 2))
    sigma = singular_values(B)
    scale = max(norm, 1e-300)
    rank = int(np.sum(sigma > TRANSFORM_CONFIG["rank_tol"] * scale))
    hermitian = is_hermitian(B, rtol=1e-10)
    eigenvalues = np.linalg.eigvalsh(hermitize(B))
    retained = sigma[group.k - 1] / scale if sigma.size >= group.k else 0.0

    E_target = spec.target_space
    F = group.F_alpha
    conditions = {
        "hermitian": hermitian,
        "positive_semidefinite": bool(eigenvalues[0] >= -TRANSFORM_CONFIG["psd_floor"] * norm),
        "rank": rank == group.k,
        "rank_margin": bool(retained >= TRANSFORM_CONFIG["rank_margin"]),
        "transversality": intersection_dim(E_target, F, TRANSFORM_CONFIG["transversality_tol"]) == 0,
    }
    margins = {
        "min_eigenvalue": float(eigenvalues[0]) / scale,
        "rank": float(rank),
        "retained_singular_value": float(retained),
        "angle_to_forbidden": min_principal_angle(E_target, F),
    }
    diagnostics = TargetDiagnostics(conditions=conditions, margins=margins)

    if diagnostics.failed:
        condition = diagnostics.failed[0]
        if condition == "rank_margin":
            logger.warning(f"Target B is within the rank margin (retained singular value {retained:.2e})")
        if raise_on_failure:
            raise RejectedTargetError(
                f"target B rejected for alpha={spec.alpha}: condition '{condition}' failed "
                f"(margins: {', '.join(f'{k}={v:.3g}' for k, v in margins.items())})",
                condition=condition,
                margins=margins,
            )
    return diagnostics


def _kernel_matrices(S_a: np.ndarray, A: np.ndarray):
    """K = A (I + S_a A)^{-1} per node, with condition numbers of I + S_a A"""
    n = A.shape[0]
    M = np.eye(n) + S_a @ A
    # K M = A  <=>  M^T K^T = A^T
    K = np.swapaxes(np.linalg.solve(np.swapaxes(M, -1, -2), np.broadcast_to(A.T, M.shape)), -1, -2)
    return K, np.linalg.cond(M)


def _transformed_values(V_values, phi, dphi, K) -> np.ndarray:
    """V - 2 [phi' K phi* + phi K phi'* - phi K phi* phi K phi*], pointwise, not symmetrized"""
    phi_h = np.swapaxes(phi, -1, -2).conj()
    dphi_h = np.swapaxes(dphi, -1, -2).conj()
    kernel = phi @ K @ phi_h
    return V_values - 2.0 * (dphi @ K @ phi_h + phi @ K @ dphi_h - kernel @ kernel)


class DarbouxPotential(Potential):
    """
    Potential produced by one isospectral transform of ``base``

    Off the cache grid phi_a, phi_a' and S_a(x) are cubic Hermite interpolants
    with their exact derivatives (phi_a', (V - lambda_a) phi_a, phi_a* phi_a);
    at cache nodes the values are the cached ones.
    """

    kind = "darboux"

    def __init__(self, base: Potential, spec: TransformSpec, group: EigenGroup, cache: TransformCache):
        super().__init__(base.n)
        self.base = base
        self.spec = spec
        self.group = group
        self.cache = cache
        V_nodes = base.eval_many(cache.xs)
        eye = np.eye(base.n)
        second = (V_nodes - group.lam * eye) @ cache.phi_a
        self._phi_spline = CubicHermiteSpline(cache.xs, cache.phi_a, cache.dphi_a, axis=0)
        self._dphi_spline = CubicHermiteSpline(cache.xs, cache.dphi_a, second, axis=0)
        gram = np.swapaxes(cache.phi_a, 1, 2).conj() @ cache.phi_a
        self._S_spline = CubicHermiteSpline(cache.xs, cache.S_a, gram, axis=0)

        raw = _transformed_values(V_nodes, cache.phi_a, cache.dphi_a, cache.K)
        self.raw_asymmetry = float(np.max(np.linalg.norm(raw - np.swapaxes(raw, 1, 2).conj(), axis=(1, 2))))

    @property
    def depth(self) -> int:
        return 1 + (self.base.depth if isinstance(self.base, DarbouxPotential) else 0)

    def _evaluate(self, xs: np.ndarray) -> np.ndarray:
        phi = self._phi_spline(xs)
        dphi = self._dphi_spline(xs)
        S = hermitize(self._S_spline(xs))
        K, _ = _kernel_matrices(S, self.cache.A)
        return _transformed_values(self.base.eval_many(xs), phi, dphi, K)

    def to_payload(self) -> Dict:
        return materialize(self, label="darboux").to_payload()


def build_transform(
    V: Potential,
    spec: TransformSpec,
    group: EigenGroup,
    grid_size: Optional[int] = None
) -> DarbouxPotential:
    """
    Build V~ for one transform

    Args:
        V: Base potential
        spec: Target residue matrix for group alpha
        group: The attached group alpha of V
        grid_size: Cache nodes (odd; default from config)

    Raises:
        RejectedTargetError: If validate_target fails
        NumericalConditioningError: If I + S_a(x) A is numerically singular
    """
    grid_size = PROPAGATOR_CONFIG["cache_grid"] if grid_size is None else grid_size
    if grid_size < 17 or grid_size % 2 == 0:
        raise ContractViolationError(f"cache grid must be odd and >= 17, got {grid_size}")
    validate_target(spec, group)

    sol = propagate(V, group.lam, grid_size - 1)
    A = hermitize(spec.B - group.B_alpha)
    K, condition = _kernel_matrices(sol.S, A)

    worst = int(np.argmax(condition))
    if not np.all(np.isfinite(condition)) or condition[worst] > TRANSFORM_CONFIG["condition_limit"]:
        raise NumericalConditioningError(
            f"I + S_alpha(x) A is numerically singular at x={sol.xs[worst]:.6f} "
            f"(condition {condition[worst]:.2e})",
            x=float(sol.xs[worst]),
            condition=float(condition[worst]),
        )

    asymmetry = np.linalg.norm(K - np.swapaxes(K, 1, 2).conj(), axis=(1, 2))
    k_residual = float(np.max(asymmetry / (1.0 + np.linalg.norm(K, axis=(1, 2)))))
    phi1 = sol.phi[-1]
    boundary_norm = float(np.linalg.norm(phi1 @ K[-1] @ phi1.conj().T, 2))

    cache = TransformCache(
        xs=sol.xs,
        lam_alpha=group.lam,
        A=A,
        phi_a=sol.phi,
        dphi_a=sol.dphi,
        S_a=sol.S,
        K=K,
        solution=sol,
        max_condition=float(condition[worst]),
        k_hermitian_residual=k_residual,
        boundary_kernel_norm=boundary_norm,
    )
    transformed = DarbouxPotential(V, spec, group, cache)
    logger.info(
        f"Built transform at alpha={spec.alpha} (lambda={group.lam:.8g}): "
        f"max cond {cache.max_condition:.2e}, boundary kernel {boundary_norm:.2e}"
    )
    return transformed


def transformed_phi(transform: DarbouxPotential, lam, steps: Optional[int] = None) -> MatrixSolution:
    """
    Closed-form solution for V~ from base solutions only

    phi~ = phi - phi_a K T,  phi~' = phi' - phi_a' K T - phi_a K phi_a* phi~,
    S~ = S - T* K T, with T the cross Gram of phi_a and phi(., lambda).
    """
    cache = transform.cache
    if steps is not None and steps != cache.steps:
        raise ContractViolationError(f"closed form lives on the cache grid ({cache.steps} steps), got {steps}")

    base = propagate(transform.base, lam, cache.steps)
    T = cross_gram(transform.base, lam, cache.solution, solution=base).T
    KT = cache.K @ T
    phi_a_h = np.swapaxes(cache.phi_a, 1, 2).conj()

    phi = base.phi - cache.phi_a @ KT
    dphi = base.dphi - cache.dphi_a @ KT - cache.phi_a @ cache.K @ phi_a_h @ phi
    S = hermitize(base.S - np.swapaxes(T, 1, 2).conj() @ KT)
    return MatrixSolution(lam=lam, xs=base.xs, phi=phi, dphi=dphi, S=S)


def inverse_spec(original_group: EigenGroup, alpha: int) -> TransformSpec:
    """Spec restoring the original residue matrix of group alpha"""
    original_group.require_attached()
    return TransformSpec(alpha=alpha, B=original_group.B_alpha)


def compose(
    V: Potential,
    specs: Sequence[TransformSpec],
    lambda_max: Optional[float] = None,
    steps: Optional[int] = None,
    grid_size: Optional[int] = None,
    jobs: Optional[int] = None
) -> Potential:
    """
    Apply transforms in order, each validated against the previous stage

    Raises:
        CompositionError: With the 1-based stage index of the first failure
    """
    current = V
    for stage, spec in enumerate(specs, 1):
        stage_lambda_max = SOLVER_CONFIG["lambda_max"] if lambda_max is None else lambda_max
        spectrum = compute_spectrum(current, lambda_max=stage_lambda_max, steps=steps, jobs=jobs)
        if spec.alpha > len(spectrum.groups):
            raise CompositionError(
                f"stage {stage}: alpha={spec.alpha} but only {len(spectrum.groups)} group(s) "
                f"below lambda_max={stage_lambda_max}",
                stage=stage,
            )
        group = attach_group_data(current, spectrum.group(spec.alpha), steps)
        try:
            current = build_transform(current, spec, group, grid_size)
        except RejectedTargetError as e:
            raise CompositionError(f"stage {stage}: {e}", stage=stage) from e
        logger.info(f"Stage {stage}/{len(specs)} applied (alpha={spec.alpha})")
    return current


# Spec files -------------------------------------------------------------------------------------


class TransformSpecDocument(BaseModel):
    alpha: int = Field(ge=1)
    B: List[List[List[float]]]


def _spec_from_document(item, path: str, index: Optional[int]) -> TransformSpec:
    where = f"entry {index}" if index is not None else None
    try:
        document = TransformSpecDocument(**item)
    except ValidationError as e:
        first = e.errors()[0]
        field_path = ".".join(str(part) for part in first["loc"])
        location = f"{where}, field {field_path}" if where else f"field {field_path}"
        raise PotentialFormatError(first["msg"], path=path, location=location) from e
    except TypeError as e:
        raise PotentialFormatError(f"transform spec must be a JSON object: {e}", path=path, location=where) from e
    try:
        return TransformSpec(alpha=document.alpha, B=decode_matrix(document.B))
    except (ValueError, ContractViolationError) as e:
        location = f"{where}, field B" if where else "field B"
        raise PotentialFormatError(str(e), path=path, location=location) from e


def load_transform_specs(path: Union[str, Path]) -> List[TransformSpec]:
    """Read a spec file holding one object or an ordered list of objects"""
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise PotentialFormatError(f"cannot read transform spec: {e}", path=str(path)) from e
    except json.JSONDecodeError as e:
        raise PotentialFormatError(e.msg, path=str(path), location=f"line {e.lineno}, column {e.colno}") from e

    if isinstance(payload, list):
        return [_spec_from_document(item, str(path), i) for i, item in enumerate(payload, 1)]
    return [_spec_from_document(payload, str(path), None)]


def save_transform_specs(specs: Sequence[TransformSpec], path: Union[str, Path]) -> Path:
    path = Path(path)
    payload = [spec.to_payload() for spec in specs]
    if len(payload) == 1:
        payload = payload[0]
    path.write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")
    return path
