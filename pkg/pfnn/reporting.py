"""
Reproduction report: grades the artifacts of preset runs against target values.

The artifact directory holds one subdirectory per preset run (its output_dir name):
poisson-ex1, helmholtz-ex1, bratu-ex1, bratu-ex1-study, poisson-ex1-study, inverse-ex1
and validate. Records whose artifacts are missing are skipped; the overall flag passes
only when every record passes.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from . import artifacts

PASS = "pass"
FAIL = "fail"
SKIPPED = "skipped"

BOUNDARY_EXACT = 1e-10
INTERIOR_LINF = 5e-2
INTERIOR_MAE = 1e-2
FORWARD_RUNTIME = 300.0
ENSEMBLE_RUNTIME = 7200.0
MONOTONE_SLACK = 1e-4
ROUNDING_FLOOR = 1e-13
BRATU_NORMS = {20: 1.0442995, 30: 1.0443096}


@dataclass
class Record:
    name: str
    criterion: str
    target_value: Optional[float]
    target_source: str
    tolerance: str
    measured: Optional[float] = None
    status: str = SKIPPED
    detail: str = ""
    missing: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "criterion": self.criterion,
            "target_value": self.target_value,
            "target_source": self.target_source,
            "measured": self.measured,
            "tolerance": self.tolerance,
            "status": self.status,
            "detail": self.detail,
            "missing": self.missing,
        }


@dataclass
class ReproductionReport:
    records: list[Record]

    @property
    def passed(self) -> bool:
        return bool(self.records) and all(r.status == PASS for r in self.records)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "counts": {s: sum(r.status == s for r in self.records) for s in (PASS, FAIL, SKIPPED)},
            "records": [r.to_dict() for r in self.records],
        }


class _Artifacts:
    """Lazy JSON reader that remembers which files were missing."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.missing: list[str] = []

    def get(self, run: str, name: str) -> Optional[dict]:
        path = self.root / run / name
        data = artifacts.read_json(path)
        if data is None:
            self.missing.append(f"{run}/{name}")
        return data


def _grade(record: Record, store: _Artifacts, measure: Callable[[_Artifacts], Optional[tuple[float, bool, str]]]):
    store.missing = []
    try:
        outcome = measure(store)
    except (KeyError, TypeError, IndexError) as e:
        outcome = None
        record.detail = f"malformed artifact: {e}"
    record.missing = list(store.missing)
    if outcome is None:
        record.status = SKIPPED
        return record
    measured, ok, detail = outcome
    record.measured = measured
    record.status = PASS if ok else FAIL
    record.detail = detail
    return record


def _runtime(store: _Artifacts, run: str) -> Optional[float]:
    timing = artifacts.read_json(store.root / run / artifacts.TIMING_JSON)
    return None if timing is None else timing.get("runtime_seconds")


# ============================================================================
# CRITERIA
# ============================================================================

def _forward_poisson(store):
    data = store.get("poisson-ex1", artifacts.REPORT_JSON)
    if data is None:
        return None
    report = data["report"]
    runtime = _runtime(store, "poisson-ex1")
    ok = report["linf_interior"] <= INTERIOR_LINF and report["mae_interior"] <= INTERIOR_MAE
    if runtime is not None:
        ok = ok and runtime <= FORWARD_RUNTIME
    return report["linf_interior"], ok, f"MAE {report['mae_interior']:.3e}, runtime {runtime}"


def _boundary_exactness(store):
    values = []
    for run in ("poisson-ex1", "helmholtz-ex1"):
        data = store.get(run, artifacts.REPORT_JSON)
        if data is not None:
            values.append(data["report"]["mae_boundary"])
    ensemble = store.get("inverse-ex1", artifacts.ENSEMBLE_JSON)
    if ensemble is not None:
        values.append(ensemble["random_model"]["boundary_mae"])
    if store.missing:
        return None
    worst = max(values)
    return worst, worst <= BOUNDARY_EXACT, "max over Poisson, Helmholtz and an untrained inverse model"


def _forward_helmholtz(store):
    data = store.get("helmholtz-ex1", artifacts.REPORT_JSON)
    if data is None:
        return None
    report = data["report"]
    ok = report["linf_interior"] <= INTERIOR_LINF and report["mae_boundary"] <= BOUNDARY_EXACT
    return report["linf_interior"], ok, f"boundary MAE {report['mae_boundary']:.3e}"


def _bratu(store):
    data = store.get("bratu-ex1", artifacts.RECURRENT_JSON)
    if data is None:
        return None
    linf = data["final"]["linf_interior"]
    rate = data.get("measured_rate")
    ok = linf <= INTERIOR_LINF and rate is not None and rate < 1.0
    return linf, ok, f"measured contraction rate {rate}"


def _bratu_norms(store):
    data = store.get("bratu-ex1-study", artifacts.STUDY_JSON)
    if data is None:
        return None
    norms = {int(row["M"]): row["beta_norm_first"] for row in data["rows"]}
    if not all(m in norms for m in BRATU_NORMS):
        return None
    rel = max(abs(norms[m] - target) / target for m, target in BRATU_NORMS.items())
    increasing = norms[30] - norms[20] > 0.0
    return rel, rel <= 1e-3 and increasing, f"|β_20| = {norms[20]:.7f}, |β_30| = {norms[30]:.7f}"


def _non_increasing(values, slack: float) -> bool:
    return all(b <= a * (1.0 + slack) + ROUNDING_FLOOR for a, b in zip(values[:-1], values[1:]))


def _monotonicity(store):
    data = store.get("poisson-ex1-study", artifacts.STUDY_JSON)
    if data is None:
        return None
    rows = sorted(data["rows"], key=lambda row: row["M"])
    boundary = [row["mae_bnd"] for row in rows]
    interior = [row["mae_int"] for row in rows]
    norms = [row["beta_norm"] for row in rows]
    worst_increase = 0.0
    ok = _non_increasing(boundary, 0.0)
    for i in range(1, len(rows)):
        if interior[i] > interior[i - 1]:
            relative = (interior[i] - interior[i - 1]) / interior[i - 1]
            worst_increase = max(worst_increase, relative)
            if norms[i] <= norms[i - 1] or relative > MONOTONE_SLACK:
                ok = False
    return worst_increase, ok, f"boundary MAE sequence non-increasing: {_non_increasing(boundary, 0.0)}"


def _bound_validity(store):
    margins = {}
    unbounded = []
    for run in ("poisson-ex1", "helmholtz-ex1"):
        data = store.get(run, artifacts.REPORT_JSON)
        if data is None:
            continue
        report = data["report"]
        if report.get("bound_interior") is None or report.get("bound_boundary") is None:
            unbounded.append(run)
            continue
        margins[run] = min(report["bound_interior"] - report["linf_interior"],
                           report["bound_boundary"] - report["linf_boundary"])
    recurrent = store.get("bratu-ex1", artifacts.RECURRENT_JSON)
    if recurrent is not None:
        bound = recurrent.get("recurrent_bound")
        if bound is None:
            unbounded.append("bratu-ex1")
        else:
            final = recurrent["final"]
            margins["bratu-ex1"] = bound["bound"] - max(final["linf_interior"], final["linf_boundary"])
    if not margins and not unbounded:
        return None
    worst = min(margins.values()) if margins else None
    ok = not unbounded and worst >= 0.0
    detail = "min over runs of bound minus measured L∞"
    if unbounded:
        detail += f"; no bound reported by {', '.join(unbounded)}"
    return worst, ok, detail


def _inverse(store):
    data = store.get("inverse-ex1", artifacts.ENSEMBLE_JSON)
    if data is None:
        return None
    stats = data["statistics"]
    runtime = _runtime(store, "inverse-ex1")
    ok = (stats["train_mse"]["mean"] <= 1e-5
          and stats["test_linf_interior"]["mean"] <= INTERIOR_LINF
          and stats["test_mae_boundary"]["mean"] <= 1e-12)
    if runtime is not None:
        ok = ok and runtime <= ENSEMBLE_RUNTIME
    return (stats["train_mse"]["mean"], ok,
            f"test L∞ {stats['test_linf_interior']['mean']:.3e}, "
            f"boundary MAE {stats['test_mae_boundary']['mean']:.3e}")


def _checks(names: tuple[str, ...]):
    def measure(store):
        data = store.get("validate", artifacts.VALIDATE_JSON)
        if data is None:
            return None
        checks = {c["name"]: c for c in data["checks"]}
        if not all(n in checks for n in names):
            return None
        worst = max(checks[n]["value"] / checks[n]["tolerance"] for n in names)
        return worst, all(checks[n]["passed"] for n in names), "largest value/tolerance ratio"
    return measure


CRITERIA = [
    ("A1", "Forward Poisson interior accuracy", INTERIOR_LINF, "closed form ¼x1(r² - 1)", "absolute",
     _forward_poisson),
    ("A2", "Boundary exactness", BOUNDARY_EXACT, "boundary data reproduced to rounding", "absolute",
     _boundary_exactness),
    ("A3", "Forward Helmholtz interior accuracy", INTERIOR_LINF, "closed form x1³ - 2x2²", "absolute",
     _forward_helmholtz),
    ("A4", "Recurrent Bratu solve", INTERIOR_LINF, "closed form 1 - r², contraction q < 1", "absolute", _bratu),
    ("A5", "Bratu density norms at M = 20, 30", 1.0442995, "reference norms 1.0442995 and 1.0443096",
     "relative 1e-3", _bratu_norms),
    ("A6", "Error monotonicity in M", MONOTONE_SLACK, "non-strict decrease with the layer count",
     "property", _monotonicity),
    ("A7", "Error bound validity", 0.0, "bound ≥ measured L∞", "property", _bound_validity),
    ("A8", "Inverse ensemble", 1e-5, "reference training MSE 8.45e-07, test L∞ 7.73e-03",
     "order of magnitude", _inverse),
    ("A9", "Oracle equivalence and Gauss identities", 1.0, "dense solve, Gauss identity", "ratio ≤ 1",
     _checks(("fnn_vs_dense", "gauss_interior", "gauss_boundary"))),
    ("A10", "Special functions", 1.0, "high-precision K0, K1", "ratio ≤ 1",
     _checks(("bessel_oracle", "bessel_derivative"))),
]


def build_report(artifact_dir: Path) -> ReproductionReport:
    """One record per criterion; a pure function of the directory contents."""
    store = _Artifacts(Path(artifact_dir))
    records = []
    for key, title, target, source, tolerance, measure in CRITERIA:
        record = Record(name=f"{key} {title}", criterion=key, target_value=target, target_source=source,
                        tolerance=tolerance)
        records.append(_grade(record, store, measure))
    return ReproductionReport(records)

