"""
Report Manager for isospec
Builds deterministic JSON reports and CSV tables and writes them to disk
"""

import hashlib
import io
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from matrix_core import encode_matrix
from potential import Potential
from propagator import MatrixSolution
from spectrum import Spectrum
from utils.logging_config import get_logger

logger = get_logger(__name__)


def _jsonable(value: Any) -> Any:
    """Convert numpy scalars/arrays and nested containers to plain JSON types"""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if np.isfinite(value) else str(value)
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value


class ReportManager:
    """Builds reports for spectra, spectral data, transforms and verify runs"""

    def __init__(self, out: Optional[str] = None):
        """
        Initialize report manager

        Args:
            out: Output file for the next report (None writes to stdout)
        """
        self.out = Path(out) if out else None
        logger.debug(f"Report manager initialized with out: {self.out or '<stdout>'}")

    @staticmethod
    def potential_hash(V: Potential) -> str:
        """
        MD5 of the canonical JSON payload of a potential

        Args:
            V: Potential

        Returns:
            Hex digest
        """
        canonical = json.dumps(V.to_payload(), sort_keys=True, separators=(",", ":"))
        return hashlib.md5(canonical.encode()).hexdigest()

    def spectrum_report(
        self,
        V: Potential,
        spectrum: Spectrum,
        scan: Optional[Dict[str, np.ndarray]] = None
    ) -> Dict[str, Any]:
        groups = [
            {
                "alpha": alpha,
                "lambda": group.lam,
                "k": group.k,
                "e": encode_matrix(group.e.vectors.T),
            }
            for alpha, group in enumerate(spectrum.groups, 1)
        ]
        report = {
            "potential_hash": self.potential_hash(V),
            "n": V.n,
            "lambda_max": spectrum.lambda_max,
            "groups": groups,
            "diagnostics": spectrum.diagnostics,
        }
        if scan is not None:
            report["scan"] = scan
        return _jsonable(report)

    def data_report(
        self,
        V: Potential,
        spectrum: Spectrum,
        checks: Sequence[Dict[str, Dict]],
        residues: Sequence[Optional[np.ndarray]]
    ) -> Dict[str, Any]:
        """
        Spectrum report extended with per-group spectral data

        Args:
            V: Potential
            spectrum: Spectrum with attached groups
            checks: Named residuals per group (spectral_data.group_checks)
            residues: Contour residue matrix per group (None where skipped)
        """
        report = self.spectrum_report(V, spectrum)
        for entry, group, group_checks, residue in zip(report["groups"], spectrum.groups, checks, residues):
            entry.update({
                "S_alpha": encode_matrix(group.S_alpha),
                "g_alpha": encode_matrix(group.g_alpha),
                "B_alpha": encode_matrix(group.B_alpha),
                "D_alpha": encode_matrix(group.D_alpha),
                "F_alpha": encode_matrix(group.F_alpha.vectors.T),
                "E_sharp": encode_matrix(group.E_sharp.vectors.T),
                "Z_alpha": encode_matrix(group.Z_alpha),
                "residue": encode_matrix(residue) if residue is not None else None,
                "checks": group_checks,
            })
        return _jsonable(report)

    def transform_report(self, source: Potential, transformed: Potential, stages: List[Dict[str, Any]]) -> Dict[str, Any]:
        return _jsonable({
            "source_hash": self.potential_hash(source),
            "potential_hash": self.potential_hash(transformed),
            "stages": stages,
        })

    def verify_report(self, V: Potential, reports) -> Dict[str, Any]:
        return _jsonable({
            "potential_hash": self.potential_hash(V),
            "passed": all(r.passed for r in reports),
            "checks": [r.model_dump() for r in reports],
        })

    def write_json(self, report: Any, path: Optional[Union[str, Path]] = None) -> Optional[Path]:
        """
        Write a report as sorted, indented JSON (byte-stable for equal input)

        Returns:
            The path written, or None when printed to stdout
        """
        text = json.dumps(_jsonable(report), indent=2, sort_keys=True, ensure_ascii=False) + "\n"
        target = Path(path) if path else self.out
        if target is None:
            sys.stdout.write(text)
            return None
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(text, encoding="utf-8")
        logger.info(f"Report written to {target}")
        return target

    def write_csv(
        self,
        header: Sequence[str],
        rows: np.ndarray,
        path: Optional[Union[str, Path]] = None
    ) -> Optional[Path]:
        """Write a numeric table with a header line via numpy.savetxt"""
        buffer = io.StringIO()
        np.savetxt(buffer, np.asarray(rows, dtype=float), delimiter=",", header=",".join(header), comments="", fmt="%.17g")
        target = Path(path) if path else self.out
        if target is None:
            sys.stdout.write(buffer.getvalue())
            return None
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(buffer.getvalue(), encoding="utf-8")
        logger.info(f"Table written to {target} ({len(rows)} rows)")
        return target


def _entry_columns(prefix: str, n: int) -> List[str]:
    return [f"{part}_{prefix}{i + 1}{j + 1}" for i in range(n) for j in range(n) for part in ("re", "im")]


def _flatten(values: np.ndarray) -> np.ndarray:
    """(m, n, n) complex -> (m, 2 n^2) real columns re, im per entry, row-major"""
    return np.stack([values.real, values.imag], axis=-1).reshape(values.shape[0], -1)


def potential_table(V: Potential, points: int = 201):
    xs = np.linspace(0.0, 1.0, points)
    header = ["x"] + _entry_columns("V", V.n)
    return header, np.column_stack([xs, _flatten(V.eval_many(xs))])


def trajectory_table(sol: MatrixSolution):
    header = ["x"] + _entry_columns("phi", sol.n) + _entry_columns("dphi", sol.n)
    return header, np.column_stack([sol.xs, _flatten(sol.phi), _flatten(sol.dphi)])


def scan_columns(lams: np.ndarray, sigma: np.ndarray) -> Dict[str, np.ndarray]:
    """lambda, sigma_min and |det| (product of singular values) of phi(1, lambda)"""
    return {"lambda": lams, "sigma_min": sigma[:, -1], "abs_det": np.prod(sigma, axis=1)}


def scan_table(scan: Dict[str, Any]):
    """CSV rows from scan_columns or from the scan stored in a spectrum report"""
    header = ["lambda", "sigma_min", "abs_det"]
    return header, np.column_stack([np.asarray(scan[name], dtype=float) for name in header])


def groups_table(report: Dict[str, Any]):
    header = ["alpha", "lambda", "k"]
    rows = [[g["alpha"], g["lambda"], g["k"]] for g in report.get("groups", [])]
    return header, np.array(rows, dtype=float).reshape(-1, 3)
