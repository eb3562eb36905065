"""
Named numerical checks of the identities behind the spectral data and the
isospectral transforms

Every check returns CheckReport records; run_suite runs a batch in a thread
pool and returns the reports in declaration order.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field, model_validator

from config import PROPAGATOR_CONFIG, VERIFY_TOLERANCES, CONCURRENCY_CONFIG
from darboux import (
    TransformSpec,
    build_transform,
    inverse_spec,
    transformed_phi,
)
from errors import ContourGeometryError
from matrix_core import intersection_dim, subspace_distance
from potential import Potential, ZeroPotential
from propagator import chi_solution, propagate, propagate_endpoint, resolve_steps
from spectral_data import attach_group_data, attach_spectrum, group_checks, m_residue, residue_residuals
from spectrum import Spectrum, compute_spectrum, locate_group
from utils.logging_config import get_logger

logger = get_logger(__name__)

ASYMPTOTIC_MODES = (5, 10, 20, 40)
CLOSED_FORM_RANGE = (-5.0, 80.0)


class CheckReport(BaseModel):
    """One check outcome; passed iff residual <= tolerance (skipped reports always pass)"""

    name: str
    residual: float
    tolerance: float
    passed: bool = False
    skipped: bool = False
    context: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _verdict(self) -> "CheckReport":
        self.passed = self.skipped or bool(np.isfinite(self.residual) and self.residual <= self.tolerance)
        return self


def _tol(name: str, tolerances: Optional[Dict[str, float]]) -> float:
    if tolerances and name in tolerances:
        return tolerances[name]
    return VERIFY_TOLERANCES[name]


def _report(name: str, residual: float, tolerances=None, **context) -> CheckReport:
    return CheckReport(name=name, residual=float(residual), tolerance=_tol(name, tolerances), context=context)


def _skipped(name: str, reason: str, tolerances=None, **context) -> CheckReport:
    logger.warning(f"Check {name} skipped: {reason}")
    return CheckReport(
        name=name, residual=0.0, tolerance=_tol(name, tolerances), skipped=True, context={"reason": reason, **context}
    )


def _cache_grid(steps: Optional[int]) -> Optional[int]:
    return None if steps is None else resolve_steps(steps) + 1


def _attached(V: Potential, spectrum: Optional[Spectrum], steps, jobs) -> Spectrum:
    if spectrum is None:
        spectrum = compute_spectrum(V, steps=steps, jobs=jobs)
    if any(not g.attached for g in spectrum.groups):
        spectrum = attach_spectrum(V, spectrum, steps, jobs)
    return spectrum


def check_wronskian(V: Potential, lambdas: Sequence[float], steps=None, tolerances=None) -> List[CheckReport]:
    """max over the grid of ||phi* phi' - phi'* phi|| relative to the largest ||phi|| ||phi'||"""
    reports = []
    for lam in lambdas:
        sol = propagate(V, lam, steps)
        phi_h = np.swapaxes(sol.phi, 1, 2).conj()
        dphi_h = np.swapaxes(sol.dphi, 1, 2).conj()
        defect = np.linalg.norm(phi_h @ sol.dphi - dphi_h @ sol.phi, axis=(1, 2))
        scale = max(float(np.max(np.linalg.norm(sol.phi, axis=(1, 2)) * np.linalg.norm(sol.dphi, axis=(1, 2)))), 1.0)
        reports.append(_report("wronskian", np.max(defect) / scale, tolerances, **{"lambda": float(lam)}))
    return reports


def check_connection(V: Potential, lambdas: Sequence[float], steps=None, tolerances=None) -> List[CheckReport]:
    """chi* phi' - chi'* phi + phi(1) vanishes at every grid node (real lambda)"""
    reports = []
    for lam in lambdas:
        sol = propagate(V, lam, steps)
        chi = chi_solution(V, lam, steps)
        chi_h = np.swapaxes(chi.chi, 1, 2).conj()
        dchi_h = np.swapaxes(chi.dchi, 1, 2).conj()
        defect = chi_h @ sol.dphi - dchi_h @ sol.phi + sol.phi[-1]
        residual = float(np.max(np.linalg.norm(defect, axis=(1, 2))))
        reports.append(_report("connection", residual, tolerances, **{"lambda": float(lam)}))
    return reports


def check_norming(V: Potential, spectrum: Spectrum, steps=None, tolerances=None) -> List[CheckReport]:
    """Two computations of g_alpha: e* S_alpha e against e* phidot*(1) phi'(1) e"""
    reports = []
    for alpha, group in enumerate(spectrum.groups, 1):
        group.require_attached()
        e = group.e.vectors
        boundary = e.conj().T @ group.phidot1.conj().T @ group.dphi1 @ e
        residual = np.linalg.norm(boundary - group.g_alpha) / np.linalg.norm(group.g_alpha)
        reports.append(_report("norming", residual, tolerances, alpha=alpha, **{"lambda": group.lam}))
    return reports


def check_asymptotics(
    V: Potential,
    z_list: Sequence[int] = ASYMPTOTIC_MODES,
    steps: Optional[int] = None,
    tolerances=None
) -> CheckReport:
    """
    Large-z behaviour of phi(1, z^2) at z = pi (n + 1/2)

    residual_n = z^2 ||phi(1) - sin z / z I + cos z / (2 z^2) int V||. The free
    solution sin z x / z is propagated on the same grid so integrator phase
    error cancels. The remainder is o(1) only, so the check is the ratio
    last/first of the sequence; an identically tiny sequence passes.
    """
    steps = PROPAGATOR_CONFIG["asymptotic_steps"] if steps is None else steps
    z = np.pi * (np.asarray(z_list, dtype=float) + 0.5)
    integral = V.integral()
    phi = propagate_endpoint(V, z**2, steps).phi
    free = propagate_endpoint(ZeroPotential(V.n), z**2, steps).phi
    correction = (np.cos(z) / (2.0 * z**2))[:, None, None] * integral[None]
    sequence = (z**2) * np.linalg.norm(phi - free + correction, axis=(1, 2))

    if np.max(sequence) <= 1e-9:
        ratio = 0.0
    else:
        ratio = float(sequence[-1] / sequence[0])
    monotone = bool(np.all(np.diff(sequence) <= 0))
    return _report(
        "asymptotics", ratio, tolerances, modes=list(z_list), sequence=sequence.tolist(), monotone=monotone
    )


def check_group_identities(V: Potential, spectrum: Spectrum, steps=None, tolerances=None) -> List[CheckReport]:
    """Per-group identities (multiplicity, Z_alpha, boundary identities, D_alpha, F_alpha, B_alpha)"""
    reports = []
    for alpha, group in enumerate(spectrum.groups, 1):
        for name, values in group_checks(V, group, steps).items():
            if name == "norming":
                continue
            context = {key: value for key, value in values.items() if key != "residual"}
            reports.append(_report(name, values["residual"], tolerances, alpha=alpha, **{"lambda": group.lam}, **context))
    return reports


def check_residues(
    V: Potential,
    spectrum: Spectrum,
    nodes: Optional[int] = None,
    steps=None,
    tolerances=None
) -> List[CheckReport]:
    """Contour residue of m against -g_alpha^{-1} on E_alpha and 0 on its complement"""
    reports = []
    for alpha, group in enumerate(spectrum.groups, 1):
        context = {"alpha": alpha, "lambda": group.lam}
        try:
            R = m_residue(V, group, nodes=nodes, spectrum=spectrum, steps=steps)
        except ContourGeometryError as e:
            reports.append(_skipped("residue_on_eigenspace", str(e), tolerances, **context))
            continue
        residuals = residue_residuals(group, R)
        reports.append(_report("residue_on_eigenspace", residuals["residue_on_eigenspace"], tolerances, **context))
        if group.k == group.n:
            reports.append(_skipped("residue_off_eigenspace", "E_alpha is the whole space", tolerances, **context))
        else:
            reports.append(_report("residue_off_eigenspace", residuals["residue_off_eigenspace"], tolerances, **context))
    return reports


def _max_relative(pairs) -> float:
    values = [np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300) for a, b in pairs]
    return float(max(values)) if values else 0.0


def check_transform(
    V: Potential,
    spec: TransformSpec,
    spectrum: Optional[Spectrum] = None,
    steps: Optional[int] = None,
    compare_groups: int = 3,
    seed: int = 0,
    jobs: Optional[int] = None,
    tolerances=None
) -> List[CheckReport]:
    """
    Postconditions of one transform

    Isospectrality, the new residue matrix at alpha, unchanged residue
    matrices and eigenspaces elsewhere (first ``compare_groups`` groups),
    E~_alpha = E^(B), F~_alpha = F_alpha, the cache invariants and the
    closed-form solution against direct propagation.
    """
    spectrum = _attached(V, spectrum, steps, jobs)
    group = spectrum.group(spec.alpha)
    transformed = build_transform(V, spec, group, _cache_grid(steps))
    new_spectrum = _attached(
        transformed, compute_spectrum(transformed, lambda_max=spectrum.lambda_max, steps=steps, jobs=jobs), steps, jobs
    )
    context = {"alpha": spec.alpha}
    reports = []

    if len(new_spectrum.groups) == len(spectrum.groups):
        eigen_residual = max((abs(a - b) for a, b in zip(new_spectrum.lambdas, spectrum.lambdas)), default=0.0)
        mismatched = sum(a != b for a, b in zip(new_spectrum.multiplicities, spectrum.multiplicities))
    else:
        eigen_residual, mismatched = float("inf"), float(abs(len(new_spectrum.groups) - len(spectrum.groups)))
    reports.append(_report("transform_eigenvalues", eigen_residual, tolerances, groups=len(new_spectrum.groups), **context))
    reports.append(_report("transform_multiplicities", mismatched, tolerances, **context))

    if len(new_spectrum.groups) < spec.alpha:
        return reports

    new_group = new_spectrum.group(spec.alpha)
    reports.append(_report(
        "transform_target_residue", _max_relative([(new_group.B_alpha, spec.B)]), tolerances, **context
    ))
    count = min(compare_groups, len(spectrum.groups), len(new_spectrum.groups))
    others = [beta for beta in range(1, count + 1) if beta != spec.alpha]
    reports.append(_report(
        "transform_other_residues",
        _max_relative([(new_spectrum.group(b).B_alpha, spectrum.group(b).B_alpha) for b in others]),
        tolerances, compared=others, **context,
    ))
    reports.append(_report(
        "transform_eigenspace", subspace_distance(new_group.e, spec.target_space), tolerances, **context
    ))
    reports.append(_report(
        "transform_other_eigenspaces",
        max((subspace_distance(new_spectrum.group(b).e, spectrum.group(b).e) for b in others), default=0.0),
        tolerances, compared=others, **context,
    ))
    reports.append(_report(
        "transform_forbidden", subspace_distance(new_group.F_alpha, group.F_alpha), tolerances, **context
    ))

    cache = transformed.cache
    reports.append(_report("k_hermitian", cache.k_hermitian_residual, tolerances, **context))
    reports.append(_report("boundary_kernel", cache.boundary_kernel_norm, tolerances, **context))
    reports.append(_report("potential_hermitian", transformed.raw_asymmetry, tolerances, **context))

    rng = np.random.default_rng(seed)
    lams = np.sort(rng.uniform(*CLOSED_FORM_RANGE, size=5))
    deviations = []
    for lam in lams:
        closed = transformed_phi(transformed, lam)
        direct = propagate(transformed, lam, cache.steps)
        deviations.append(float(np.max(np.abs(closed.phi - direct.phi))))
    reports.append(_report(
        "closed_form", max(deviations), tolerances, lambdas=lams.tolist(), deviations=deviations, **context
    ))
    return reports


def check_boundary_invariance(
    V: Potential,
    spec: TransformSpec,
    spectrum: Optional[Spectrum] = None,
    lambdas: Sequence[float] = (-3.0, 20.0, 4 * np.pi**2, 55.0),
    steps: Optional[int] = None,
    jobs: Optional[int] = None,
    tolerances=None
) -> CheckReport:
    """
    phi~(1, lambda) = phi(1, lambda) when the transform keeps E_alpha

    When B also equals B_alpha the Dirichlet-to-Neumann ratio phi' phi^{-1}
    at x = 1 is compared as well. Skipped when E^(B) differs from E_alpha.
    """
    spectrum = _attached(V, spectrum, steps, jobs)
    group = spectrum.group(spec.alpha)
    if subspace_distance(spec.target_space, group.e) > 1e-8:
        return _skipped("boundary_invariance", "transform changes the eigenspace", tolerances, alpha=spec.alpha)

    transformed = build_transform(V, spec, group, _cache_grid(steps))
    keeps_norming = np.linalg.norm(spec.B - group.B_alpha) <= 1e-12 * np.linalg.norm(group.B_alpha)
    residual = 0.0
    for lam in lambdas:
        closed = transformed_phi(transformed, lam)
        base = propagate(V, lam, transformed.cache.steps)
        scale = max(float(np.linalg.norm(base.phi[-1])), 1.0)
        residual = max(residual, float(np.linalg.norm(closed.phi[-1] - base.phi[-1])) / scale)
        if keeps_norming and min((abs(lam - value) for value in spectrum.lambdas), default=np.inf) > 1e-3:
            ratio_closed = closed.dphi[-1] @ np.linalg.inv(closed.phi[-1])
            ratio_base = base.dphi[-1] @ np.linalg.inv(base.phi[-1])
            residual = max(residual, float(np.linalg.norm(ratio_closed - ratio_base)) / max(float(np.linalg.norm(ratio_base)), 1.0))
    return _report(
        "boundary_invariance", residual, tolerances,
        alpha=spec.alpha, lambdas=[float(v) for v in lambdas], keeps_norming=bool(keeps_norming),
    )


def check_example_n2(V: Potential, spectrum: Spectrum, tolerances=None) -> CheckReport:
    """
    For N = 2 with k_1 = k_2 = 1 and every higher group double:
    F_1 = E_2, F_2 = E_1 and E_1, E_2 transversal

    Only groups below the spectrum's lambda_max can be inspected, so the
    hypothesis on the higher groups is checked up to that cutoff.
    """
    multiplicities = spectrum.multiplicities
    if V.n != 2 or len(spectrum.groups) < 2 or multiplicities[:2] != [1, 1]:
        return _skipped(
            "example_n2", "needs N=2 and k_1 = k_2 = 1", tolerances, n=V.n, multiplicities=multiplicities
        )
    if any(k != 2 for k in multiplicities[2:]):
        return _skipped(
            "example_n2", "needs k_alpha = 2 for alpha >= 3", tolerances, n=V.n, multiplicities=multiplicities
        )
    first, second = spectrum.group(1).require_attached(), spectrum.group(2).require_attached()
    residual = max(subspace_distance(first.F_alpha, second.e), subspace_distance(second.F_alpha, first.e))
    overlap = intersection_dim(first.e, second.e)
    if overlap:
        residual = np.pi / 2
    return _report("example_n2", residual, tolerances, eigenspace_overlap=overlap, higher_groups=len(multiplicities) - 2)


def check_uniqueness_roundtrip(
    V: Potential,
    spec: TransformSpec,
    spectrum: Optional[Spectrum] = None,
    steps: Optional[int] = None,
    points: int = 101,
    jobs: Optional[int] = None,
    tolerances=None
) -> CheckReport:
    """Transform, then transform back to the original B_alpha; compare potentials on a uniform grid"""
    spectrum = _attached(V, spectrum, steps, jobs)
    group = spectrum.group(spec.alpha)
    transformed = build_transform(V, spec, group, _cache_grid(steps))

    gap = spectrum.nearest_gap(spec.alpha)
    half_width = 0.5 * gap if np.isfinite(gap) else None
    moved = locate_group(transformed, group.lam, half_width=half_width, steps=steps)
    moved = attach_group_data(transformed, moved, steps)
    restored = build_transform(transformed, inverse_spec(group, spec.alpha), moved, _cache_grid(steps))

    xs = np.linspace(0.0, 1.0, points)
    residual = float(np.max(np.linalg.norm(restored.eval_many(xs) - V.eval_many(xs), 2, axis=(1, 2))))
    return _report("uniqueness_roundtrip", residual, tolerances, alpha=spec.alpha, points=points)


def run_suite(
    V: Potential,
    spectrum: Optional[Spectrum] = None,
    specs: Sequence[TransformSpec] = (),
    steps: Optional[int] = None,
    seed: int = 0,
    jobs: Optional[int] = None,
    contour_nodes: Optional[int] = None,
    tolerances: Optional[Dict[str, float]] = None
) -> List[CheckReport]:
    """
    Run every check on V (and every transform spec) and return the reports
    in declaration order
    """
    jobs = CONCURRENCY_CONFIG["jobs"] if jobs is None else jobs
    spectrum = _attached(V, spectrum, steps, jobs)
    rng = np.random.default_rng(seed)
    wronskian_lams = rng.uniform(-5.0, 80.0, size=5).tolist()
    connection_lams = rng.uniform(-5.0, 80.0, size=10).tolist()

    def as_list(result):
        return result if isinstance(result, list) else [result]

    checks: List[Callable[[], Any]] = [
        lambda: check_wronskian(V, wronskian_lams, steps, tolerances),
        lambda: check_connection(V, connection_lams, steps, tolerances),
        lambda: check_norming(V, spectrum, steps, tolerances),
        lambda: check_asymptotics(V, tolerances=tolerances),
        lambda: check_group_identities(V, spectrum, steps, tolerances),
        lambda: check_residues(V, spectrum, contour_nodes, steps, tolerances),
        lambda: check_example_n2(V, spectrum, tolerances),
    ]
    for spec in specs:
        checks.extend([
            lambda spec=spec: check_transform(V, spec, spectrum, steps, seed=seed, tolerances=tolerances),
            lambda spec=spec: check_boundary_invariance(V, spec, spectrum, steps=steps, tolerances=tolerances),
            lambda spec=spec: check_uniqueness_roundtrip(V, spec, spectrum, steps, tolerances=tolerances),
        ])

    with ThreadPoolExecutor(max_workers=jobs) as executor:
        futures = [executor.submit(check) for check in checks]
        reports = [report for future in futures for report in as_list(future.result())]

    failed = [r.name for r in reports if not r.passed]
    logger.info(
        f"Verify suite: {len(reports)} check(s), {sum(r.skipped for r in reports)} skipped, {len(failed)} failed"
        + (f" ({', '.join(sorted(set(failed)))})" if failed else "")
    )
    return reports
