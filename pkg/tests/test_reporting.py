"""Tests for grading preset artifacts."""

import pytest

from pfnn import artifacts
from pfnn.reporting import FAIL, PASS, SKIPPED, build_report


def write_report(root, run, **report):
    base = {"mae_interior": 1e-5, "linf_interior": 1e-4, "mae_boundary": 1e-14, "linf_boundary": 1e-13,
            "bound_interior": None, "bound_boundary": None}
    artifacts.write_json(root / run / artifacts.REPORT_JSON, {"report": {**base, **report}})


def status(report, criterion):
    return next(r for r in report.records if r.criterion == criterion).status


def test_empty_directory_skips_everything(tmp_path):
    """No artifacts: every record is skipped and the report fails."""
    report = build_report(tmp_path)
    assert all(r.status == SKIPPED for r in report.records)
    assert not report.passed
    assert report.to_dict()["counts"][SKIPPED] == len(report.records)
    assert "poisson-ex1/report.json" in report.records[0].missing


def test_forward_criteria(tmp_path):
    """Accurate forward runs pass, inaccurate ones fail."""
    write_report(tmp_path, "poisson-ex1")
    write_report(tmp_path, "helmholtz-ex1", linf_interior=0.2)
    report = build_report(tmp_path)
    assert status(report, "A1") == PASS
    assert status(report, "A3") == FAIL
    # A2 also needs the inverse ensemble
    assert status(report, "A2") == SKIPPED


def test_runtime_limit(tmp_path):
    write_report(tmp_path, "poisson-ex1")
    artifacts.write_json(tmp_path / "poisson-ex1" / artifacts.TIMING_JSON, {"runtime_seconds": 1e4})
    assert status(build_report(tmp_path), "A1") == FAIL


def test_bound_validity(tmp_path):
    """A7 compares bounds with measured L∞ on both parts."""
    write_report(tmp_path, "poisson-ex1", bound_interior=1e-3, bound_boundary=1e-12)
    report = build_report(tmp_path)
    record = next(r for r in report.records if r.criterion == "A7")
    assert record.status == PASS
    assert record.measured == pytest.approx(1e-12 - 1e-13)
    write_report(tmp_path, "poisson-ex1", bound_interior=1e-5, bound_boundary=1e-12)
    assert status(build_report(tmp_path), "A7") == FAIL


def write_recurrent(root, bound, linf):
    payload = {"final": {"linf_interior": linf, "linf_boundary": 1e-14},
               "recurrent_bound": None if bound is None else {"bound": bound}}
    artifacts.write_json(root / "bratu-ex1" / artifacts.RECURRENT_JSON, payload)


def test_bound_validity_covers_recurrent_run(tmp_path):
    """The Bratu bound is compared with its final L∞ error."""
    write_report(tmp_path, "poisson-ex1", bound_interior=1e-3, bound_boundary=1e-12)
    write_recurrent(tmp_path, bound=1e-2, linf=4e-3)
    record = next(r for r in build_report(tmp_path).records if r.criterion == "A7")
    assert record.status == PASS
    assert record.measured == pytest.approx(1e-12 - 1e-13)
    write_recurrent(tmp_path, bound=1e-2, linf=5.0)
    record = next(r for r in build_report(tmp_path).records if r.criterion == "A7")
    assert record.status == FAIL
    assert record.measured == pytest.approx(1e-2 - 5.0)


def test_missing_bound_fails(tmp_path):
    """A run that reports no bound fails the record instead of being passed over."""
    write_report(tmp_path, "poisson-ex1", bound_interior=1e-3, bound_boundary=1e-12)
    write_recurrent(tmp_path, bound=None, linf=5.0)
    record = next(r for r in build_report(tmp_path).records if r.criterion == "A7")
    assert record.status == FAIL
    assert "bratu-ex1" in record.detail
    write_report(tmp_path, "helmholtz-ex1")
    write_recurrent(tmp_path, bound=1e-2, linf=4e-3)
    record = next(r for r in build_report(tmp_path).records if r.criterion == "A7")
    assert record.status == FAIL
    assert "helmholtz-ex1" in record.detail


def test_bratu_norms(tmp_path):
    """A5 compares the first-iterate density norms at M = 20 and 30."""
    rows = [{"M": 20, "beta_norm_first": 1.0442995}, {"M": 30, "beta_norm_first": 1.0443096}]
    artifacts.write_json(tmp_path / "bratu-ex1-study" / artifacts.STUDY_JSON, {"rows": rows})
    assert status(build_report(tmp_path), "A5") == PASS
    rows[1]["beta_norm_first"] = 1.0
    artifacts.write_json(tmp_path / "bratu-ex1-study" / artifacts.STUDY_JSON, {"rows": rows})
    assert status(build_report(tmp_path), "A5") == FAIL


def test_monotonicity(tmp_path):
    """Boundary MAE must not grow with M; interior growth needs a growing density norm."""
    rows = [
        {"M": 10, "mae_bnd": 1e-3, "mae_int": 1e-3, "beta_norm": 1.0},
        {"M": 20, "mae_bnd": 1e-6, "mae_int": 1.00001e-3, "beta_norm": 1.1},
        {"M": 40, "mae_bnd": 1e-9, "mae_int": 5e-4, "beta_norm": 1.1},
    ]
    artifacts.write_json(tmp_path / "poisson-ex1-study" / artifacts.STUDY_JSON, {"rows": rows})
    assert status(build_report(tmp_path), "A6") == PASS
    rows[2]["mae_bnd"] = 1e-2
    artifacts.write_json(tmp_path / "poisson-ex1-study" / artifacts.STUDY_JSON, {"rows": rows})
    assert status(build_report(tmp_path), "A6") == FAIL


def test_validation_checks(tmp_path):
    """A9 reads validate.json; missing checks skip the record."""
    checks = [{"name": n, "passed": True, "value": 1e-12, "tolerance": 1e-8}
              for n in ("fnn_vs_dense", "gauss_interior", "gauss_boundary")]
    artifacts.write_json(tmp_path / "validate" / artifacts.VALIDATE_JSON, {"checks": checks})
    report = build_report(tmp_path)
    assert status(report, "A9") == PASS
    assert status(report, "A10") == SKIPPED


def test_malformed_artifact_is_skipped(tmp_path):
    artifacts.write_json(tmp_path / "bratu-ex1" / artifacts.RECURRENT_JSON, {"final": {}})
    record = next(r for r in build_report(tmp_path).records if r.criterion == "A4")
    assert record.status == SKIPPED
    assert "malformed" in record.detail
