"""
Test the named verification checks and the suite runner
"""

import numpy as np

from conftest import STEPS
from potential import Potential, random_fourier
from spectrum import Spectrum
from verify import (
    CheckReport,
    check_asymptotics,
    check_boundary_invariance,
    check_connection,
    check_example_n2,
    check_group_identities,
    check_norming,
    check_residues,
    check_transform,
    check_uniqueness_roundtrip,
    check_wronskian,
    run_suite,
)


class SkewPotential(Potential):
    """Constant non-Hermitian matrix, bypassing the Hermitian projection"""

    kind = "skew"

    def _evaluate(self, xs):
        return np.broadcast_to(np.array([[0.0, 5.0], [0.0, 0.0]], dtype=complex), (xs.size, 2, 2)).copy()

    def eval_many(self, xs):
        return self._evaluate(np.atleast_1d(np.asarray(xs, dtype=float)))

    def to_payload(self):
        return {"n": 2, "kind": self.kind}


def assert_all_passed(reports):
    failed = [(r.name, r.residual, r.tolerance, r.context) for r in reports if not r.passed]
    assert not failed, failed


def test_check_report_verdict():
    assert CheckReport(name="norming", residual=1e-9, tolerance=1e-6).passed
    assert not CheckReport(name="norming", residual=1e-3, tolerance=1e-6).passed
    assert not CheckReport(name="norming", residual=float("nan"), tolerance=1e-6).passed
    assert CheckReport(name="norming", residual=1.0, tolerance=1e-6, skipped=True).passed


def test_wronskian_and_connection():
    V = random_fourier(2, seed=0)
    assert_all_passed(check_wronskian(V, [-5.0, 12.0, 60.0], steps=1024))
    assert_all_passed(check_connection(V, [-5.0, 12.0, 60.0], steps=1024))


def test_wronskian_detects_non_hermitian_potential():
    (report,) = check_wronskian(SkewPotential(2), [20.0], steps=512)
    assert not report.passed
    assert report.context["lambda"] == 20.0


def test_tolerance_override():
    V = random_fourier(2, seed=0)
    (report,) = check_connection(V, [12.0], steps=64, tolerances={"connection": 1e-300})
    assert report.tolerance == 1e-300
    assert not report.passed


def test_asymptotics():
    report = check_asymptotics(random_fourier(2, seed=4))
    assert report.passed
    assert len(report.context["sequence"]) == 4


def test_free_potential_checks(zero2, zero_spectrum):
    assert_all_passed(check_norming(zero2, zero_spectrum, STEPS))
    assert_all_passed(check_group_identities(zero2, zero_spectrum, STEPS))
    assert check_asymptotics(zero2).residual == 0.0

    residues = check_residues(zero2, zero_spectrum, steps=STEPS)
    assert_all_passed(residues)
    # E_alpha is all of C^2 for every group
    assert all(r.skipped for r in residues if r.name == "residue_off_eigenspace")


def test_example_n2(zero2, zero_spectrum, diag2, diag_spectrum):
    assert check_example_n2(zero2, zero_spectrum).skipped
    # Groups 3 and 4 of diag(0, 10) are simple
    assert check_example_n2(diag2, diag_spectrum).context["reason"] == "needs k_alpha = 2 for alpha >= 3"

    below_third = Spectrum(groups=diag_spectrum.groups[:2], lambda_max=30.0)
    report = check_example_n2(diag2, below_third)
    assert report.passed and not report.skipped
    assert report.context["eigenspace_overlap"] == 0


def test_norming_transform_checks(zero2, zero_spectrum, norming_spec):
    reports = check_transform(zero2, norming_spec, zero_spectrum, steps=STEPS)
    assert_all_passed(reports)
    assert {r.name for r in reports} >= {"transform_eigenvalues", "closed_form", "transform_forbidden"}

    invariance = check_boundary_invariance(zero2, norming_spec, zero_spectrum, steps=STEPS)
    assert invariance.passed and not invariance.skipped
    assert not invariance.context["keeps_norming"]


def test_rotation_transform_checks(diag2, diag_spectrum, rotation_spec):
    assert_all_passed(check_transform(diag2, rotation_spec, diag_spectrum, steps=STEPS))
    assert check_boundary_invariance(diag2, rotation_spec, diag_spectrum, steps=STEPS).skipped

    roundtrip = check_uniqueness_roundtrip(diag2, rotation_spec, diag_spectrum, steps=STEPS)
    assert roundtrip.passed
    assert roundtrip.context["points"] == 101


def test_identity_transform_keeps_boundary_data(diag2, diag_spectrum):
    from darboux import TransformSpec

    spec = TransformSpec(alpha=2, B=diag_spectrum.group(2).B_alpha)
    report = check_boundary_invariance(diag2, spec, diag_spectrum, steps=STEPS)
    assert report.context["keeps_norming"]
    assert report.passed


def test_run_suite_on_random_potential():
    V = random_fourier(2, seed=0)
    reports = run_suite(V, steps=2048, jobs=2)
    assert_all_passed(reports)
    names = [r.name for r in reports]
    assert names[0] == "wronskian"
    assert "residue_on_eigenspace" in names


def test_run_suite_is_deterministic(diag2, diag_spectrum):
    first = run_suite(diag2, diag_spectrum, steps=STEPS, seed=3, jobs=1)
    second = run_suite(diag2, diag_spectrum, steps=STEPS, seed=3, jobs=4)
    assert [r.model_dump() for r in first] == [r.model_dump() for r in second]


def test_run_suite_with_transform(diag2, diag_spectrum, rotation_spec):
    reports = run_suite(diag2, diag_spectrum, specs=[rotation_spec], steps=STEPS, seed=1, jobs=2)
    assert_all_passed(reports)
    assert any(r.name == "uniqueness_roundtrip" for r in reports)
