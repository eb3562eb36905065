"""
Hermitian matrix potentials V(x) on [0,1]

Closed-form kinds (zero, constant_diagonal, fourier), sampled grids with
cubic Hermite interpolation, and the reflected view x -> 1 - x. Darboux
potentials live in darboux.py and plug into the same interface.
"""

import json
import threading
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, Field, ValidationError, model_validator
from scipy.interpolate import CubicHermiteSpline

from errors import ContractViolationError, DomainError, PotentialFormatError
from matrix_core import decode_matrix, encode_matrix, hermitize, is_hermitian
from utils.logging_config import get_logger

logger = get_logger(__name__)

FILE_FORMAT = 1
DOMAIN_SLACK = 1e-12
MATERIALIZE_POINTS = 4097


class Potential(ABC):
    """N x N Hermitian matrix function on [0,1]; immutable after construction"""

    kind: str = "abstract"

    def __init__(self, n: int):
        if n < 1:
            raise ContractViolationError(f"matrix size must be positive, got {n}")
        self.n = n
        self._sample_cache: Dict[int, np.ndarray] = {}
        self._reflection: Optional["ReflectedPotential"] = None
        self._cache_lock = threading.RLock()

    @abstractmethod
    def _evaluate(self, xs: np.ndarray) -> np.ndarray:
        """Values at points already checked to lie in [0,1], shape (m, n, n)"""

    @abstractmethod
    def to_payload(self) -> Dict[str, Any]:
        """JSON-ready description (without the format field)"""

    def eval_many(self, xs) -> np.ndarray:
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        if xs.size and (xs.min() < -DOMAIN_SLACK or xs.max() > 1.0 + DOMAIN_SLACK):
            raise DomainError(
                f"potential evaluated outside [0,1]: range [{xs.min()}, {xs.max()}]"
            )
        return hermitize(self._evaluate(np.clip(xs, 0.0, 1.0)))

    def eval(self, x: float) -> np.ndarray:
        return self.eval_many([x])[0]

    def samples(self, steps: int) -> np.ndarray:
        """
        Values on the half-step grid k / (2 * steps), k = 0..2*steps

        Even k are integration nodes, odd k the midpoints a one-step method
        needs. Cached per step count; safe to call from worker threads.
        """
        with self._cache_lock:
            cached = self._sample_cache.get(steps)
            if cached is None:
                cached = self.eval_many(np.linspace(0.0, 1.0, 2 * steps + 1))
                cached.setflags(write=False)
                self._sample_cache[steps] = cached
        return cached

    def sup_norm(self, steps: int = 256) -> float:
        """max_x ||V(x)||_2 over the sample grid"""
        return float(np.max(np.linalg.norm(self.samples(steps), ord=2, axis=(1, 2))))

    def integral(self, steps: int = 1024) -> np.ndarray:
        """Simpson approximation of the integral of V over [0,1]"""
        from scipy.integrate import simpson

        values = self.samples(steps)
        return simpson(values, x=np.linspace(0.0, 1.0, values.shape[0]), axis=0)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(n={self.n})"


class ZeroPotential(Potential):
    kind = "zero"

    def _evaluate(self, xs: np.ndarray) -> np.ndarray:
        return np.zeros((xs.size, self.n, self.n), dtype=complex)

    def to_payload(self) -> Dict[str, Any]:
        return {"n": self.n, "kind": self.kind}


class ConstantDiagonalPotential(Potential):
    kind = "constant_diagonal"

    def __init__(self, diag: Sequence[float]):
        diag = np.asarray(diag, dtype=float)
        super().__init__(diag.size)
        self.diag = diag

    def _evaluate(self, xs: np.ndarray) -> np.ndarray:
        return np.broadcast_to(np.diag(self.diag).astype(complex), (xs.size, self.n, self.n)).copy()

    def to_payload(self) -> Dict[str, Any]:
        return {"n": self.n, "kind": self.kind, "diag": self.diag.tolist()}


class FourierPotential(Potential):
    """V(x) = sum_m C_m cos(m pi x) with Hermitian coefficient matrices C_m"""

    kind = "fourier"

    def __init__(self, coeffs: Union[np.ndarray, List[np.ndarray]]):
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.ndim != 3 or coeffs.shape[1] != coeffs.shape[2]:
            raise ContractViolationError(f"fourier coefficients must be (modes, n, n), got {coeffs.shape}")
        for m, C in enumerate(coeffs):
            if not is_hermitian(C, rtol=1e-10):
                raise ContractViolationError(f"fourier coefficient {m} is not Hermitian")
        super().__init__(coeffs.shape[1])
        self.coeffs = hermitize(coeffs)

    def _evaluate(self, xs: np.ndarray) -> np.ndarray:
        modes = np.arange(self.coeffs.shape[0])
        basis = np.cos(np.pi * np.outer(xs, modes))
        return np.einsum("xm,mij->xij", basis, self.coeffs)

    def to_payload(self) -> Dict[str, Any]:
        return {"n": self.n, "kind": self.kind, "coeffs": encode_matrix(self.coeffs)}


class GridPotential(Potential):
    """
    Sampled potential with cubic Hermite interpolation

    Slopes are second-order finite differences of the stored values, so the
    interpolant is C^1 and passes through every sample.
    """

    kind = "grid"

    def __init__(self, xs: Sequence[float], values, materialized_from: Optional[str] = None):
        xs = np.asarray(xs, dtype=float)
        values = np.asarray(values, dtype=complex)
        if xs.ndim != 1 or xs.size < 2:
            raise ContractViolationError("grid needs at least two nodes")
        if xs[0] != 0.0 or xs[-1] != 1.0:
            raise ContractViolationError(f"grid must start at 0 and end at 1, got [{xs[0]}, {xs[-1]}]")
        if np.any(np.diff(xs) <= 0):
            raise ContractViolationError("grid nodes must be strictly increasing")
        if values.ndim != 3 or values.shape[0] != xs.size or values.shape[1] != values.shape[2]:
            raise ContractViolationError(
                f"grid values must be ({xs.size}, n, n), got {values.shape}"
            )
        asymmetry = np.max(np.abs(values - np.swapaxes(values, 1, 2).conj()))
        if asymmetry > 1e-8 * (1.0 + np.max(np.abs(values))):
            raise ContractViolationError(f"grid values are not Hermitian (asymmetry {asymmetry:.3e})")
        super().__init__(values.shape[1])
        self.xs = xs
        self.values = hermitize(values)
        self.materialized_from = materialized_from
        slopes = np.gradient(self.values, xs, axis=0, edge_order=2 if xs.size > 2 else 1)
        self._spline = CubicHermiteSpline(xs, self.values, slopes, axis=0)

    def _evaluate(self, xs: np.ndarray) -> np.ndarray:
        return self._spline(xs)

    def to_payload(self) -> Dict[str, Any]:
        payload = {
            "n": self.n,
            "kind": self.kind,
            "xs": self.xs.tolist(),
            "values": encode_matrix(self.values),
        }
        if self.materialized_from:
            payload["materialized_from"] = self.materialized_from
        return payload


class ReflectedPotential(Potential):
    """View x -> source(1 - x)"""

    kind = "reflected"

    def __init__(self, source: Potential):
        super().__init__(source.n)
        self.source = source

    def _evaluate(self, xs: np.ndarray) -> np.ndarray:
        return self.source.eval_many(1.0 - xs)

    def to_payload(self) -> Dict[str, Any]:
        return materialize(self, label="reflected").to_payload()


def reflect(V: Potential) -> Potential:
    """V^sharp(x) = V(1 - x); reflecting twice returns the original object"""
    if isinstance(V, ReflectedPotential):
        return V.source
    with V._cache_lock:
        if V._reflection is None:
            V._reflection = ReflectedPotential(V)
    return V._reflection


def materialize(V: Potential, points: int = MATERIALIZE_POINTS, label: Optional[str] = None) -> GridPotential:
    """Sample V on a uniform grid and wrap the samples as a grid potential"""
    xs = np.linspace(0.0, 1.0, points)
    return GridPotential(xs, V.eval_many(xs), materialized_from=label or V.kind)


def random_fourier(n: int, modes: int = 4, seed: int = 0, amplitude: float = 1.0) -> FourierPotential:
    """
    Seeded random cosine potential

    Mode m carries a random Hermitian matrix scaled by amplitude / (m + 1)^2,
    which keeps the potential smooth.
    """
    rng = np.random.default_rng(seed)
    coeffs = []
    for m in range(modes):
        raw = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        coeffs.append(amplitude * hermitize(raw) / (m + 1) ** 2)
    return FourierPotential(np.array(coeffs))


# File format ------------------------------------------------------------------------------------


class PotentialDocument(BaseModel):
    """Schema of a potential file"""

    format: Literal[1] = FILE_FORMAT
    n: int = Field(ge=1)
    kind: Literal["zero", "constant_diagonal", "fourier", "grid"]
    diag: Optional[List[float]] = None
    coeffs: Optional[List[List[List[List[float]]]]] = None
    xs: Optional[List[float]] = None
    values: Optional[List[List[List[List[float]]]]] = None
    materialized_from: Optional[str] = None

    @model_validator(mode="after")
    def _payload_matches_kind(self) -> "PotentialDocument":
        required = {
            "zero": [],
            "constant_diagonal": ["diag"],
            "fourier": ["coeffs"],
            "grid": ["xs", "values"],
        }[self.kind]
        missing = [name for name in required if getattr(self, name) is None]
        if missing:
            raise ValueError(f"kind '{self.kind}' requires field(s): {', '.join(missing)}")
        if self.kind == "constant_diagonal" and len(self.diag) != self.n:
            raise ValueError(f"diag has {len(self.diag)} entries, expected n={self.n}")
        return self


def potential_from_payload(payload: Dict[str, Any], source: Optional[str] = None) -> Potential:
    """Build a potential from a decoded JSON object"""
    try:
        document = PotentialDocument(**payload)
    except ValidationError as e:
        first = e.errors()[0]
        location = "field " + ".".join(str(part) for part in first["loc"]) if first["loc"] else None
        raise PotentialFormatError(first["msg"], path=source, location=location) from e
    except TypeError as e:
        raise PotentialFormatError(f"potential file must hold a JSON object: {e}", path=source) from e

    try:
        if document.kind == "zero":
            return ZeroPotential(document.n)
        if document.kind == "constant_diagonal":
            return ConstantDiagonalPotential(document.diag)
        if document.kind == "fourier":
            coeffs = decode_matrix(document.coeffs)
            if coeffs.shape[1:] != (document.n, document.n):
                raise PotentialFormatError(
                    f"coefficient shape {coeffs.shape[1:]} does not match n={document.n}",
                    path=source, location="field coeffs",
                )
            return FourierPotential(coeffs)
        values = decode_matrix(document.values)
        if values.shape[1:] != (document.n, document.n):
            raise PotentialFormatError(
                f"value shape {values.shape[1:]} does not match n={document.n}",
                path=source, location="field values",
            )
        return GridPotential(document.xs, values, materialized_from=document.materialized_from)
    except (ContractViolationError, ValueError) as e:
        raise PotentialFormatError(str(e), path=source, location=f"kind {document.kind}") from e


def save_potential(V: Potential, path: Union[str, Path]) -> Path:
    """
    Write a potential file

    Closed forms are stored exactly; darboux and reflected potentials are
    materialized to a grid and flagged with ``materialized_from``.
    """
    path = Path(path)
    payload = {"format": FILE_FORMAT}
    payload.update(V.to_payload())
    path.write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")
    logger.debug(f"Saved {V.kind} potential (n={V.n}) to {path}")
    return path


def load_potential(path: Union[str, Path]) -> Potential:
    """
    Read a potential file

    Raises:
        PotentialFormatError: With line/column for JSON syntax errors and the
            offending field for schema errors
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise PotentialFormatError(f"cannot read potential file: {e}", path=str(path)) from e
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as e:
        raise PotentialFormatError(
            e.msg, path=str(path), location=f"line {e.lineno}, column {e.colno}"
        ) from e
    V = potential_from_payload(payload, source=str(path))
    logger.debug(f"Loaded {V.kind} potential (n={V.n}) from {path}")
    return V
