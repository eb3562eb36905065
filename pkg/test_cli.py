"""
Test the command-line entry point: commands, output files and exit codes
"""

import json

import numpy as np
import pytest

from conftest import PI2
from darboux import TransformSpec, save_transform_specs
from main import main
from potential import ConstantDiagonalPotential, ZeroPotential, load_potential, save_potential

FAST = ["--steps", "1024", "--lambda-max", "30"]


@pytest.fixture
def zero_file(tmp_path):
    return str(save_potential(ZeroPotential(2), tmp_path / "zero.json"))


@pytest.fixture
def diag_file(tmp_path):
    return str(save_potential(ConstantDiagonalPotential([0.0, 10.0]), tmp_path / "diag.json"))


@pytest.mark.parametrize("argv", [[], ["spectrum"], ["bogus", "x.json"], ["plot", "x.json", "--what", "nothing"]])
def test_usage_errors(argv):
    assert main(argv) == 1


def test_invalid_steps_is_config_error(zero_file):
    assert main(["spectrum", zero_file, "--steps", "15"]) == 1


def test_unreadable_config_file(tmp_path, zero_file):
    assert main(["spectrum", zero_file, "--config", str(tmp_path / "missing.json")]) == 1


def test_parse_errors(tmp_path):
    broken = tmp_path / "broken.json"
    broken.write_text('{"format": 1, "n": 2,\n "kind": }')
    assert main(["spectrum", str(broken)]) == 2
    assert main(["spectrum", str(tmp_path / "missing.json")]) == 2


def test_spectrum_report(tmp_path, zero_file):
    out = tmp_path / "spectrum.json"
    scan = tmp_path / "scan.csv"
    argv = ["spectrum", zero_file, *FAST, "--out", str(out), "--scan-csv", str(scan), "--scan-points", "31"]
    assert main(argv) == 0

    report = json.loads(out.read_text())
    assert report["n"] == 2
    assert [g["k"] for g in report["groups"]] == [2]
    assert report["groups"][0]["lambda"] == pytest.approx(PI2, abs=1e-6)

    lines = scan.read_text().splitlines()
    assert lines[0] == "lambda,sigma_min,abs_det"
    assert len(lines) == 32


def test_spectrum_report_is_byte_stable(tmp_path, zero_file):
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["spectrum", zero_file, *FAST, "--out", str(first)]) == 0
    assert main(["spectrum", zero_file, *FAST, "--jobs", "3", "--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()


def test_config_file_with_flag_override(tmp_path, zero_file):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"steps": 1024, "lambda_max": 50.0}))
    out = tmp_path / "spectrum.json"
    assert main(["spectrum", zero_file, "--config", str(config), "--lambda-max", "30", "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["lambda_max"] == 30.0
    assert report["diagnostics"]["steps"] == 1024


def test_data_report(tmp_path, diag_file):
    out = tmp_path / "data.json"
    assert main(["data", diag_file, *FAST, "--out", str(out)]) == 0
    groups = json.loads(out.read_text())["groups"]
    assert [g["k"] for g in groups] == [1, 1]
    first = groups[0]
    assert np.allclose(np.array(first["B_alpha"])[..., 0], np.diag([2 * PI2, 0.0]), rtol=1e-5, atol=1e-5)
    assert first["residue"] is not None
    assert first["checks"]["forbidden_dim"]["residual"] == 0


def test_transform_writes_potential(tmp_path, zero_file):
    spec = save_transform_specs([TransformSpec(alpha=1, B=np.diag([2 * PI2, 8 * PI2]))], tmp_path / "spec.json")
    out = tmp_path / "report.json"
    assert main(["transform", zero_file, str(spec), *FAST, "--out", str(out)]) == 0

    report = json.loads(out.read_text())
    written = tmp_path / "zero.transformed.json"
    assert report["output"] == str(written)
    (stage,) = report["stages"]
    assert stage["stage"] == 1
    assert all(stage["conditions"].values())

    transformed = load_potential(written)
    assert transformed.kind == "grid"
    assert transformed.materialized_from == "darboux"


def test_transform_rejection_exit_code(tmp_path, diag_file):
    # E^(B) = span(e_2) is the forbidden subspace of the first group
    spec = save_transform_specs([TransformSpec(alpha=1, B=np.diag([0.0, 3.0]))], tmp_path / "spec.json")
    output = tmp_path / "never.json"
    assert main(["transform", diag_file, str(spec), *FAST, "--output", str(output)]) == 4
    assert not output.exists()


def test_transform_spec_parse_error(tmp_path, zero_file):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"alpha": 1}))
    assert main(["transform", zero_file, str(spec), *FAST]) == 2


def test_verify_passes(tmp_path, zero_file):
    out = tmp_path / "verify.json"
    assert main(["verify", zero_file, *FAST, "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["passed"]
    assert any(check["skipped"] for check in report["checks"])


def test_verify_failure_exit_code(tmp_path, zero_file):
    config = tmp_path / "strict.json"
    config.write_text(json.dumps({"tolerances": {"norming": 1e-300}}))
    out = tmp_path / "verify.json"
    assert main(["verify", zero_file, *FAST, "--config", str(config), "--out", str(out)]) == 5
    report = json.loads(out.read_text())
    assert not report["passed"]
    assert [c["name"] for c in report["checks"] if not c["passed"]] == ["norming"]


def test_plot_tables(tmp_path, zero_file):
    table = tmp_path / "potential.csv"
    assert main(["plot", zero_file, "--points", "11", "--out", str(table)]) == 0
    lines = table.read_text().splitlines()
    assert lines[0] == "x,re_V11,im_V11,re_V12,im_V12,re_V21,im_V21,re_V22,im_V22"
    assert len(lines) == 12

    trajectory = tmp_path / "trajectory.csv"
    argv = ["plot", zero_file, "--what", "trajectory", "--lam", "2.0", "--steps", "64", "--out", str(trajectory)]
    assert main(argv) == 0
    rows = np.loadtxt(trajectory, delimiter=",", skiprows=1)
    assert rows.shape == (65, 17)
    assert rows[-1, 1] == pytest.approx(np.sin(np.sqrt(2.0)) / np.sqrt(2.0), abs=1e-6)


def test_plot_groups_from_spectrum_report(tmp_path, zero_file):
    report = tmp_path / "spectrum.json"
    assert main(["spectrum", zero_file, *FAST, "--out", str(report)]) == 0
    table = tmp_path / "groups.csv"
    assert main(["plot", str(report), "--out", str(table)]) == 0
    rows = np.loadtxt(table, delimiter=",", skiprows=1, ndmin=2)
    assert rows.shape == (1, 3)
    assert rows[0, 2] == 2


def test_plot_scan_from_spectrum_report(tmp_path, zero_file, diag_file):
    report = tmp_path / "spectrum.json"
    assert main(["spectrum", zero_file, *FAST, "--scan-points", "21", "--out", str(report)]) == 0
    table = tmp_path / "scan.csv"
    assert main(["plot", str(report), "--what", "scan", "--out", str(table)]) == 0
    lines = table.read_text().splitlines()
    assert lines[0] == "lambda,sigma_min,abs_det"
    rows = np.loadtxt(table, delimiter=",", skiprows=1)
    assert rows.shape == (21, 3)
    assert rows[0, 0] == 0.0 and rows[-1, 0] == 30.0
    # sigma_min(phi(1, 0)) = 1 for V = 0
    assert rows[0, 1] == pytest.approx(1.0, abs=1e-8)

    data = tmp_path / "data.json"
    assert main(["data", diag_file, *FAST, "--out", str(data)]) == 0
    assert main(["plot", str(data), "--what", "scan", "--out", str(tmp_path / "none.csv")]) == 1
