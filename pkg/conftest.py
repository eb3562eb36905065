"""
Shared pytest fixtures for isospec

Spectra and transforms are expensive, so the standard test potentials are
built once per session.
"""

import numpy as np
import pytest

from darboux import TransformSpec, build_transform
from potential import ConstantDiagonalPotential, ZeroPotential
from spectral_data import attach_spectrum
from spectrum import compute_spectrum

STEPS = 4096
PI2 = np.pi**2


@pytest.fixture(scope="session")
def zero2():
    return ZeroPotential(2)


@pytest.fixture(scope="session")
def diag2():
    return ConstantDiagonalPotential([0.0, 10.0])


@pytest.fixture(scope="session")
def zero_spectrum(zero2):
    return attach_spectrum(zero2, compute_spectrum(zero2, lambda_max=100.0, steps=STEPS), STEPS)


@pytest.fixture(scope="session")
def diag_spectrum(diag2):
    return attach_spectrum(diag2, compute_spectrum(diag2, lambda_max=50.0, steps=STEPS), STEPS)


@pytest.fixture(scope="session")
def norming_spec():
    """Norming change on V = 0 at alpha = 1: A = diag(0, 6 pi^2)"""
    return TransformSpec(alpha=1, B=np.diag([2 * PI2, 8 * PI2]))


@pytest.fixture(scope="session")
def rotation_spec():
    """Eigenspace rotation on diag(0, 10) at alpha = 1"""
    u = np.array([np.cos(np.pi / 6), np.sin(np.pi / 6)])
    return TransformSpec(alpha=1, B=4 * PI2 * np.outer(u, u))


@pytest.fixture(scope="session")
def norming_transform(zero2, zero_spectrum, norming_spec):
    return build_transform(zero2, norming_spec, zero_spectrum.group(1), grid_size=STEPS + 1)


@pytest.fixture(scope="session")
def rotation_transform(diag2, diag_spectrum, rotation_spec):
    return build_transform(diag2, rotation_spec, diag_spectrum.group(1), grid_size=STEPS + 1)
