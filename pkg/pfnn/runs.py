"""
Command implementations: each run_* function solves, writes its artifacts into the output
directory and returns the payload it wrote.
"""

import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import artifacts, ui
from .error_analysis import ErrorReport, error_report, metrics, recurrent_bound
from .errors import ConfigError, DegenerateBoundError
from .events import MetricsEmitter
from .fredholm_net import boundary_values
from .inverse import (
    SourceModel,
    grid_points,
    make_dataset,
    reconstructed_field,
    run_ensemble,
    source_to_solution_map,
)
from .models import RunConfig
from .potential import SolutionField, solve_field
from .problems import ForwardProblem
from .recurrent import RecurrentResult, SemiLinearProblem, rpfnn_solve, step_error
from .validation import ValidationSettings, run_checks
from .volume import VolumePotential
from .workers import resolve_workers

STUDY_COLUMNS = ["M", "N", "mae_int", "linf_int", "mae_bnd", "linf_bnd", "bound_int", "bound_bnd", "beta_norm"]
BRATU_STUDY_COLUMNS = STUDY_COLUMNS + ["beta_norm_first", "beta_norm_l2_first", "linf_int_first"]


@dataclass
class RunContext:
    config: RunConfig
    out_dir: Path
    workers: int
    emitter: MetricsEmitter

    @classmethod
    def create(cls, config: RunConfig, out_dir: Optional[Path] = None, workers: Optional[int] = None,
               metrics_log: bool = True) -> "RunContext":
        out = Path(out_dir if out_dir is not None else config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        sink = out / artifacts.METRICS_JSONL if metrics_log else None
        if sink is not None:
            sink.unlink(missing_ok=True)
        return cls(config, out, resolve_workers(workers), MetricsEmitter(sink))

    def path(self, name: str) -> Path:
        return self.out_dir / name


def _write_timing(ctx: RunContext, started: float):
    artifacts.write_json(ctx.path(artifacts.TIMING_JSON),
                         {"runtime_seconds": time.perf_counter() - started, "workers": ctx.workers})


# ============================================================================
# FORWARD SOLVES
# ============================================================================

def forward_volume(config: RunConfig, problem: ForwardProblem, workers: int) -> VolumePotential:
    quad = config.quad_spec(problem)
    return VolumePotential(problem.spec, problem.psi, quad, grid=config.disc_grid(), workers=workers)


def solve_forward(config: RunConfig, problem: ForwardProblem, n_layers: int, n_nodes: int, workers: int,
                  volume: Optional[VolumePotential] = None, with_bounds: Optional[bool] = None
                  ) -> tuple[SolutionField, Optional[ErrorReport]]:
    volume = volume or forward_volume(config, problem, workers)
    solution = solve_field(problem.spec, problem.f, problem.psi, config.disc_grid(), config.boundary_grid(n_nodes),
                           config.solver.kappa, n_layers, volume.quad, exact=problem.exact, workers=workers,
                           volume=volume)
    if problem.exact is None:
        return solution, None
    bounds = config.bounds.enabled if with_bounds is None else with_bounds
    report = error_report(solution, problem.exact, with_bounds=bounds, n_angles=config.bounds.sample_angles,
                          radii_limit=config.bounds.sample_radii)
    return solution, report


def solve_recurrent(config: RunConfig, problem: ForwardProblem, n_layers: int, n_nodes: int, workers: int,
                    emitter: MetricsEmitter) -> RecurrentResult:
    semilinear = SemiLinearProblem.from_problem(problem, config.recurrent.n_outer, config.recurrent.early_stop)
    return rpfnn_solve(semilinear, config.disc_grid(), config.boundary_grid(n_nodes), config.solver.kappa,
                       n_layers, config.quadrature, workers, emitter)


def recurrent_step_error(config: RunConfig, problem: ForwardProblem, n_layers: int, n_nodes: int,
                         workers: int) -> Optional[float]:
    semilinear = SemiLinearProblem.from_problem(problem, config.recurrent.n_outer, config.recurrent.early_stop)
    return step_error(semilinear, config.disc_grid(), config.boundary_grid(n_nodes), config.solver.kappa,
                      n_layers, config.quadrature, workers)


def recurrent_summary(result: RecurrentResult, eps_step: Optional[float] = None) -> dict:
    """
    Per-iterate errors, measured contraction and the outer-iteration bound.

    The bound needs eps_step, the error of one linear solve (see recurrent.step_error).
    Per-step errors accumulate through the contraction to eps_step / (1 - q).
    """
    rows = []
    for n, (u, update) in enumerate(zip(result.iterates[1:], result.updates), start=1):
        row = {"n": n, "max_update": update}
        if u.exact_interior is not None:
            row.update(metrics(u).to_dict())
            row.pop("components")
        rows.append(row)

    first = result.iterates[1]
    final = result.final
    final_report = error_report(final, with_bounds=False) if final.exact_interior is not None else None
    q = result.measured_rate()
    summary = {
        "iterations": rows,
        "n_iterations": len(result.updates),
        "stopped_early": result.stopped_early,
        "measured_rate": q,
        "contraction_ratios": result.contraction_ratios(),
        "first": {
            "beta_norm": first.density.norm_inf,
            "beta_norm_l2": first.density.norm_l2,
            "linf_interior": rows[0].get("linf_interior"),
        },
        "final": final_report.to_dict() if final_report is not None else None,
        "recurrent_bound": None,
    }
    start = result.iterates[0]
    if start.exact_interior is not None and q is not None and eps_step is not None:
        gap = max(float(np.max(np.abs(start.interior_values - start.exact_interior), initial=0.0)),
                  float(np.max(np.abs(start.boundary_values - start.exact_boundary))))
        eps = eps_step / (1.0 - q) if q < 1.0 else eps_step
        try:
            bound = recurrent_bound(eps, q, len(result.updates), gap)
        except DegenerateBoundError as e:
            ui.debug(f"recurrent bound skipped: {e}")
        else:
            summary["recurrent_bound"] = {"eps_step": eps_step, "eps": eps, "q": q, "init_gap": gap, "bound": bound}
    return summary


def run_solve(ctx: RunContext) -> dict:
    """solution.csv and report.json (plus recurrent.json for semi-linear problems)."""
    started = time.perf_counter()
    config = ctx.config
    problem = config.build_problem()
    n_layers = config.solver.layer_list[0]
    n_nodes = config.solver.node_list[0]
    ui.debug(f"solve {problem.name}: M={n_layers} N={n_nodes} grid={config.grid.n_r}x{config.grid.n_theta}")

    payload = {"command": "solve", "problem": problem.name, "description": problem.description}
    if problem.is_semilinear:
        result = solve_recurrent(config, problem, n_layers, n_nodes, ctx.workers, ctx.emitter)
        eps_step = (recurrent_step_error(config, problem, n_layers, n_nodes, ctx.workers)
                    if config.bounds.enabled else None)
        summary = recurrent_summary(result, eps_step)
        summary["provenance"] = config.provenance()
        artifacts.write_json(ctx.path(artifacts.RECURRENT_JSON), summary)
        solution = result.final
        report = summary["final"]
        payload["recurrent"] = {k: summary[k] for k in ("n_iterations", "measured_rate", "recurrent_bound")}
    else:
        solution, error = solve_forward(config, problem, n_layers, n_nodes, ctx.workers)
        report = error.to_dict() if error is not None else None

    payload["report"] = report
    payload["density"] = {"beta_norm": solution.density.norm_inf, "beta_norm_l2": solution.density.norm_l2}
    payload["provenance"] = config.provenance()
    artifacts.write_atomic(ctx.path(artifacts.SOLUTION_CSV), solution.to_csv())
    artifacts.write_json(ctx.path(artifacts.REPORT_JSON), payload)
    _write_timing(ctx, started)
    return payload


# ============================================================================
# STUDY
# ============================================================================

def study_axis(config: RunConfig) -> tuple[str, list[int]]:
    layers = config.solver.layer_list
    nodes = config.solver.node_list
    if len(layers) >= 2 and len(nodes) >= 2:
        raise ConfigError(["study: sweep either solver.n_layers or solver.boundary_nodes, not both"])
    if len(layers) >= 2:
        return "M", layers
    if len(nodes) >= 2:
        return "N", nodes
    raise ConfigError(["study: solver.n_layers or solver.boundary_nodes needs a list of at least two values"])


def _row_from_report(m: int, n: int, report: Optional[dict], beta_norm: float) -> dict:
    report = report or {}
    return {
        "M": m,
        "N": n,
        "mae_int": report.get("mae_interior"),
        "linf_int": report.get("linf_interior"),
        "mae_bnd": report.get("mae_boundary"),
        "linf_bnd": report.get("linf_boundary"),
        "bound_int": report.get("bound_interior"),
        "bound_bnd": report.get("bound_boundary"),
        "beta_norm": beta_norm,
    }


def run_study(ctx: RunContext) -> dict:
    """study.csv and study.json: one row per value of the swept hyperparameter."""
    started = time.perf_counter()
    config = ctx.config
    problem = config.build_problem()
    axis, values = study_axis(config)
    volume = None if problem.is_semilinear else forward_volume(config, problem, ctx.workers)

    rows = []
    with ui.progress(f"study over {axis}", len(values)) as advance:
        for value in values:
            m = value if axis == "M" else config.solver.layer_list[0]
            n = value if axis == "N" else config.solver.node_list[0]
            if problem.is_semilinear:
                result = solve_recurrent(config, problem, m, n, ctx.workers, ctx.emitter)
                summary = recurrent_summary(result)
                row = _row_from_report(m, n, summary["final"], result.final.density.norm_inf)
                row["beta_norm_first"] = summary["first"]["beta_norm"]
                row["beta_norm_l2_first"] = summary["first"]["beta_norm_l2"]
                row["linf_int_first"] = summary["first"]["linf_interior"]
            else:
                solution, report = solve_forward(config, problem, m, n, ctx.workers, volume=volume)
                row = _row_from_report(m, n, report.to_dict() if report else None, solution.density.norm_inf)
            rows.append(row)
            ctx.emitter.emit("study_point", row)
            ui.debug(f"study {axis}={value}: interior MAE {row['mae_int']}, boundary MAE {row['mae_bnd']}")
            advance()

    columns = BRATU_STUDY_COLUMNS if problem.is_semilinear else STUDY_COLUMNS
    payload = {"command": "study", "problem": problem.name, "axis": axis, "columns": columns, "rows": rows,
               "provenance": config.provenance()}
    artifacts.write_atomic(ctx.path(artifacts.STUDY_CSV), artifacts.rows_to_csv(rows, columns))
    artifacts.write_json(ctx.path(artifacts.STUDY_JSON), payload)
    _write_timing(ctx, started)
    return payload


# ============================================================================
# INVERSE
# ============================================================================

def run_inverse(ctx: RunContext) -> dict:
    """model.json, ensemble.json and the best model's fields on the data and test grids."""
    started = time.perf_counter()
    config = ctx.config
    problem = config.build_problem()
    inv = config.inverse
    if not problem.spec.is_laplace or problem.is_semilinear:
        raise ConfigError([f"inverse: source recovery is implemented for the Poisson equation, got {problem.name}"])
    if problem.psi is None or problem.exact is None:
        raise ConfigError(["inverse: the problem needs a true source and an exact solution to generate data"])

    solver_grid = inv.solver_grid.build()
    boundary_grid = config.boundary_grid(inv.boundary_nodes)
    data_grid = inv.data_grid.build()
    test_grid = inv.test_grid.build()
    kappa = config.solver.kappa

    train_map = source_to_solution_map(*grid_points(data_grid), problem.f, solver_grid, boundary_grid, kappa,
                                       inv.n_layers)
    test_map = source_to_solution_map(*grid_points(test_grid), problem.f, solver_grid, boundary_grid, kappa,
                                      inv.n_layers)
    data = make_dataset(train_map, problem.psi, problem.f)

    # boundary exactness does not depend on training
    untrained = SourceModel.random(np.random.default_rng(config.seed), inv.n_hidden)
    untrained_field = reconstructed_field(untrained, test_map, test_grid)
    random_mae = float(np.mean(np.abs(untrained_field.boundary_values - boundary_values(problem.f, test_grid.thetas))))

    ensemble = run_ensemble(inv.n_runs, config.seed, data, train_map, test_map, test_grid, problem.exact,
                            inv.lambda_reg, inv.iters, inv.n_hidden, ctx.workers, ctx.emitter)
    best = ensemble.best_model

    payload = ensemble.to_dict()
    payload.update({
        "command": "inverse",
        "problem": problem.name,
        "random_model": {"seed": config.seed, "boundary_mae": random_mae},
        "best_trace": ensemble.traces[ensemble.best_index],
        "provenance": config.provenance(),
    })
    artifacts.write_json(ctx.path(artifacts.MODEL_JSON), best.to_dict())
    artifacts.write_json(ctx.path(artifacts.ENSEMBLE_JSON), payload)
    artifacts.write_atomic(ctx.path(artifacts.TRAIN_CSV),
                           reconstructed_field(best, train_map, data_grid, problem.exact).to_csv())
    artifacts.write_atomic(ctx.path(artifacts.TEST_CSV),
                           reconstructed_field(best, test_map, test_grid, problem.exact).to_csv())
    _write_timing(ctx, started)
    return payload


# ============================================================================
# VALIDATE
# ============================================================================

def run_validate(ctx: RunContext, names=None) -> dict:
    settings = ValidationSettings(ctx.config.validate_settings.boundary_nodes, ctx.config.validate_settings.gauss_tol)
    checks = run_checks(settings, names)
    payload = {"command": "validate", "passed": all(c["passed"] for c in checks), "checks": checks,
               "settings": {"boundary_nodes": settings.boundary_nodes, "gauss_tol": settings.gauss_tol}}
    artifacts.write_json(ctx.path(artifacts.VALIDATE_JSON), payload)
    return payload
