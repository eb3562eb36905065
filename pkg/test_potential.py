"""
Test potentials, reflection and the potential file format for isospec
"""

import json
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from errors import ContractViolationError, DomainError, PotentialFormatError
from potential import (
    ConstantDiagonalPotential,
    FourierPotential,
    GridPotential,
    ZeroPotential,
    load_potential,
    materialize,
    random_fourier,
    reflect,
    save_potential,
)

XS = np.linspace(0.0, 1.0, 101)


def test_closed_form_values():
    assert np.array_equal(ZeroPotential(2).eval(0.3), np.zeros((2, 2)))
    V = ConstantDiagonalPotential([0.0, 10.0])
    assert np.allclose(V.eval_many(XS), np.diag([0.0, 10.0]))


def test_domain_error_outside_interval():
    V = ZeroPotential(2)
    with pytest.raises(DomainError):
        V.eval(1.01)
    with pytest.raises(DomainError):
        V.eval_many([-0.1, 0.5])
    V.eval(1.0 + 1e-13)


def test_random_fourier_is_hermitian_and_seeded():
    V = random_fourier(3, seed=7)
    values = V.eval_many(XS)
    assert np.allclose(values, np.swapaxes(values, 1, 2).conj(), atol=1e-10)
    assert np.array_equal(values, random_fourier(3, seed=7).eval_many(XS))
    assert not np.allclose(values, random_fourier(3, seed=8).eval_many(XS))


def test_fourier_rejects_non_hermitian_modes():
    with pytest.raises(ContractViolationError):
        FourierPotential(np.array([[[0.0, 1.0], [0.0, 0.0]]]))


def test_grid_validation():
    values = np.zeros((3, 2, 2))
    with pytest.raises(ContractViolationError):
        GridPotential([0.1, 0.5, 1.0], values)
    with pytest.raises(ContractViolationError):
        GridPotential([0.0, 0.7, 0.5, 1.0], np.zeros((4, 2, 2)))
    bad = np.zeros((3, 2, 2), dtype=complex)
    bad[1, 0, 1] = 1.0
    with pytest.raises(ContractViolationError):
        GridPotential([0.0, 0.5, 1.0], bad)


def test_grid_interpolates_smooth_function():
    xs = np.linspace(0.0, 1.0, 257)
    values = np.cos(np.pi * xs)[:, None, None] * np.array([[1.0, 0.5j], [-0.5j, 2.0]])
    V = GridPotential(xs, values)
    assert np.allclose(V.eval_many(xs), values, atol=1e-14)
    mid = 0.5 * (xs[:-1] + xs[1:])
    exact = np.cos(np.pi * mid)[:, None, None] * np.array([[1.0, 0.5j], [-0.5j, 2.0]])
    assert np.max(np.abs(V.eval_many(mid) - exact)) < 1e-6


def test_reflect():
    assert np.array_equal(reflect(ZeroPotential(2)).eval(0.2), np.zeros((2, 2)))

    M0, M1 = np.diag([1.0, 2.0]), np.array([[3.0, 1j], [-1j, 4.0]])
    V = GridPotential([0.0, 1.0], [M0, M1])
    assert np.allclose(reflect(V).eval(0.0), M1)
    assert np.allclose(reflect(V).eval(1.0), M0)

    D = ConstantDiagonalPotential([0.0, 10.0])
    assert np.allclose(reflect(D).eval_many(XS), D.eval_many(XS))

    W = random_fourier(2, seed=1)
    assert reflect(reflect(W)) is W
    assert np.allclose(reflect(W).eval_many(XS), W.eval_many(1.0 - XS))


@pytest.mark.parametrize(
    "V",
    [ZeroPotential(2), ConstantDiagonalPotential([0.0, 10.0]), random_fourier(2, seed=3)],
    ids=["zero", "constant_diagonal", "fourier"],
)
def test_save_load_closed_forms(tmp_path, V):
    path = save_potential(V, tmp_path / "v.json")
    loaded = load_potential(path)
    assert loaded.kind == V.kind
    assert np.max(np.abs(loaded.eval_many(XS) - V.eval_many(XS))) <= 1e-12


def test_saved_file_layout(tmp_path):
    path = save_potential(ZeroPotential(2), tmp_path / "zero.json")
    payload = json.loads(path.read_text())
    assert payload == {"format": 1, "kind": "zero", "n": 2}


def test_materialized_round_trip(tmp_path):
    V = random_fourier(2, seed=4)
    grid = materialize(V, points=4097, label="fourier")
    loaded = load_potential(save_potential(grid, tmp_path / "grid.json"))
    assert loaded.materialized_from == "fourier"
    assert np.max(np.abs(loaded.eval_many(XS) - grid.eval_many(XS))) <= 1e-10
    assert np.max(np.abs(loaded.eval_many(XS) - V.eval_many(XS))) <= 1e-8


def test_caches_are_shared_across_threads():
    V = random_fourier(2, seed=11)
    with ThreadPoolExecutor(max_workers=8) as executor:
        samples = list(executor.map(lambda _: V.samples(256), range(16)))
        reflections = list(executor.map(lambda _: reflect(V), range(16)))
    assert all(s is samples[0] for s in samples)
    assert all(r is reflections[0] for r in reflections)
    assert not samples[0].flags.writeable


def test_integral_of_constant():
    assert np.allclose(ConstantDiagonalPotential([1.0, -2.0]).integral(), np.diag([1.0, -2.0]))


def test_load_reports_json_position(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "n": 2,\n  "kind": zero\n}')
    with pytest.raises(PotentialFormatError) as info:
        load_potential(path)
    assert "line 3" in str(info.value)
    assert info.value.exit_code == 2


@pytest.mark.parametrize(
    "payload, fragment",
    [
        ({"n": 2}, "field kind"),
        ({"n": 2, "kind": "constant_diagonal"}, "diag"),
        ({"n": 2, "kind": "constant_diagonal", "diag": [1.0]}, "diag"),
        ({"n": 2, "kind": "spline"}, "field kind"),
        ({"n": 2, "kind": "grid", "xs": [0.0, 1.0], "values": [[[[0, 0]]], [[[0, 0]]]]}, "n=2"),
        ([1, 2, 3], "JSON object"),
    ],
)
def test_load_reports_field(tmp_path, payload, fragment):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(payload))
    with pytest.raises(PotentialFormatError) as info:
        load_potential(path)
    assert fragment in str(info.value)


def test_load_missing_file(tmp_path):
    with pytest.raises(PotentialFormatError):
        load_potential(tmp_path / "missing.json")
