"""
Configuration settings for isospec
"""

import json
import os
from pathlib import Path
from typing import Any, Dict, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError, field_validator

from errors import ConfigError

# Load .env file if it exists
load_dotenv()

# Propagator configuration
PROPAGATOR_CONFIG = {
    "steps": int(os.getenv("ISOSPEC_STEPS", "4096")),
    "asymptotic_steps": 16384,  # Finer grid for the large-z asymptotics check
    "cache_grid": 4097,  # Darboux cache nodes; steps + 1 so the grids coincide
    "lambda_chunk_bytes": 256 * 1024 * 1024,  # Memory cap per batched propagation
}

# Spectrum solver configuration
SOLVER_CONFIG = {
    "mesh": 512,
    "lambda_max": float(os.getenv("ISOSPEC_LAMBDA_MAX", "100.0")),
    "lambda_max_margin": 1.2,  # Finite-difference search extends to lambda_max * margin
    "sv_tol": 1e-6,
    "cluster_tol": 1e-6,
    "refine_tol": 1e-7,  # Accept sigma_min <= refine_tol * max(sigma_max, 1)
    "scan_points": 33,  # Batched sigma_min samples per bracket before golden search
    "bracket_attempts": 3,
    "bracket_growth": 2.0,
}

# Spectral data configuration
SPECTRAL_CONFIG = {
    "contour_nodes": 64,
    "contour_radius_factor": 0.25,  # Fraction of the nearest spectral gap
    "pole_distance": 1e-6,
    "chi_condition_limit": 1e12,
}

# Isospectral transform configuration
TRANSFORM_CONFIG = {
    "psd_floor": 1e-10,
    "rank_tol": 1e-8,
    "rank_margin": 1e-6,
    "transversality_tol": 1e-8,
    "condition_limit": 1e12,
}

# Verification tolerances, one per named check
VERIFY_TOLERANCES = {
    "wronskian": 1e-8,
    "connection": 1e-7,
    "norming": 1e-6,
    "asymptotics": 0.5,  # last/first residual ratio
    "det_root_order": 0.1,
    "z_alpha_condition": 1e6,
    "pole_expansion": 1e-2,  # relative drift of the constant term
    "boundary_identity": 1e-6,
    "boundary_identity_sharp": 1e-6,
    "d_alpha_psd": 1e-8,
    "forbidden_dim": 0.5,  # integer mismatch
    "eigenspace_transversal": 0.5,  # integer intersection dimension
    "forbidden_cross_formula": 1e-5,
    "residue_b_formula": 1e-6,
    "residue_on_eigenspace": 1e-4,
    "residue_off_eigenspace": 1e-4,
    "transform_eigenvalues": 1e-5,
    "transform_multiplicities": 0.5,
    "transform_target_residue": 1e-4,
    "transform_other_residues": 1e-4,
    "transform_eigenspace": 1e-4,
    "transform_other_eigenspaces": 1e-4,
    "transform_forbidden": 1e-4,
    "k_hermitian": 1e-9,
    "boundary_kernel": 1e-7,
    "potential_hermitian": 1e-9,
    "closed_form": 1e-5,
    "boundary_invariance": 1e-6,
    "example_n2": 1e-4,
    "uniqueness_roundtrip": 1e-4,
}

# Concurrency configuration
CONCURRENCY_CONFIG = {
    "jobs": int(os.getenv("ISOSPEC_JOBS", "1")),
}

# Logging configuration
LOGGING_CONFIG = {
    "level": os.getenv("ISOSPEC_LOG_LEVEL", "INFO"),
    "format": "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    "log_file": os.getenv("ISOSPEC_LOG_FILE"),  # None disables the file handler
    "max_bytes": 10 * 1024 * 1024,  # 10MB
    "backup_count": 5,
}


class RunConfig(BaseModel):
    """Validated settings for one CLI run"""

    steps: int = PROPAGATOR_CONFIG["steps"]
    mesh: int = Field(default=SOLVER_CONFIG["mesh"], ge=64)
    lambda_max: float = Field(default=SOLVER_CONFIG["lambda_max"], gt=0)
    sv_tol: float = Field(default=SOLVER_CONFIG["sv_tol"], gt=0)
    cluster_tol: float = Field(default=SOLVER_CONFIG["cluster_tol"], gt=0)
    contour_nodes: int = Field(default=SPECTRAL_CONFIG["contour_nodes"], ge=32)
    contour_radius_factor: float = Field(
        default=SPECTRAL_CONFIG["contour_radius_factor"], gt=0, lt=0.5
    )
    jobs: int = Field(default=CONCURRENCY_CONFIG["jobs"], ge=1)
    seed: int = 0
    out: Optional[str] = None
    tolerances: Dict[str, float] = Field(default_factory=lambda: dict(VERIFY_TOLERANCES))

    @field_validator("steps")
    @classmethod
    def _steps_even(cls, value: int) -> int:
        if value < 16 or value % 2:
            raise ValueError(f"steps must be even and >= 16, got {value}")
        return value

    @field_validator("tolerances")
    @classmethod
    def _tolerances_positive(cls, value: Dict[str, float]) -> Dict[str, float]:
        merged = dict(VERIFY_TOLERANCES)
        merged.update(value)
        bad = [name for name, tol in merged.items() if not tol > 0]
        if bad:
            raise ValueError(f"tolerances must be positive: {', '.join(sorted(bad))}")
        return merged


def load_run_config(
    config_path: Optional[str] = None,
    overrides: Optional[Dict[str, Any]] = None
) -> RunConfig:
    """
    Build a RunConfig with precedence flags > config file > defaults

    Args:
        config_path: Optional JSON config file
        overrides: Flag values; entries set to None are ignored

    Returns:
        Validated RunConfig

    Raises:
        ConfigError: If the file is unreadable or a value is invalid
    """
    values: Dict[str, Any] = {}

    if config_path:
        path = Path(config_path)
        try:
            file_values = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"Cannot read config file {path}: {e}") from e
        if not isinstance(file_values, dict):
            raise ConfigError(f"Config file {path} must contain a JSON object")
        values.update(file_values)

    if overrides:
        values.update({key: value for key, value in overrides.items() if value is not None})

    try:
        return RunConfig(**values)
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration: {e}") from e
