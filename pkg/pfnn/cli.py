"""CLI interface for pfnn."""

from contextlib import contextmanager
from pathlib import Path
from typing import Optional

import typer

from . import artifacts, ui
from .errors import ConfigError, PFNNError
from .models import RunConfig, load_config, preset_names
from .reporting import build_report
from .runs import RunContext, run_inverse, run_solve, run_study, run_validate
from .validation import list_checks

app = typer.Typer(
    name="pfnn",
    help="Potential Fredholm neural networks for elliptic PDEs on the unit disc",
    no_args_is_help=True,
)

DEFAULT_OUT = Path("pfnn-out")


# ============================================================================
# SHARED OPTIONS
# ============================================================================

ConfigOption = typer.Option(None, "--config", "-c", help="Config file (YAML/JSON) or preset name")
OutOption = typer.Option(None, "--out", "-o", help="Output directory (overrides output_dir)")
SeedOption = typer.Option(None, "--seed", help="Random seed (overrides seed)")
VerboseOption = typer.Option(False, "--verbose", "-v", help="Show solver diagnostics")


def _load(config: Optional[str], out: Optional[Path], seed: Optional[int], command: str,
          required: bool = True) -> RunConfig:
    """Resolve the config; on failure write error.json and exit 1."""
    try:
        if config is None:
            if required:
                raise ConfigError([f"{command} needs --config (presets: {', '.join(preset_names())})"])
            cfg = RunConfig()
        else:
            cfg = load_config(config)
        if seed is not None:
            cfg.seed = seed
        if out is not None:
            cfg.output_dir = str(out)
        return cfg.validate()
    except (PFNNError, ValueError, OSError) as e:
        _fail(out or DEFAULT_OUT, command, e)


def _fail(out_dir: Path, command: str, error: BaseException):
    try:
        artifacts.write_error(out_dir, command, error)
    except OSError:
        pass
    ui.print_error(str(error))
    for problem in getattr(error, "problems", [])[1:]:
        ui.console.print(f"  [{ui.DIM}]{problem}[/]")
    raise typer.Exit(1)


@contextmanager
def _guard(ctx: RunContext, command: str):
    artifacts.clear_error(ctx.out_dir)
    try:
        yield
    except (PFNNError, ValueError) as e:
        _fail(ctx.out_dir, command, e)


def _context(cfg: RunConfig, verbose: bool, command: str) -> RunContext:
    ui.set_verbose(verbose)
    try:
        return RunContext.create(cfg)
    except (OSError, ValueError) as e:
        _fail(Path(cfg.output_dir), command, e)


def _provenance(cfg: RunConfig, ctx: RunContext):
    if ui.VERBOSE:
        ui.print_kv("Run", {"output": str(ctx.out_dir), "workers": ctx.workers, "seed": cfg.seed})


# ============================================================================
# COMMANDS
# ============================================================================

@app.command()
def solve(
    config: Optional[str] = ConfigOption,
    out: Optional[Path] = OutOption,
    seed: Optional[int] = SeedOption,
    verbose: bool = VerboseOption,
):
    """Solve one boundary value problem and write solution.csv and report.json."""
    cfg = _load(config, out, seed, "solve")
    ctx = _context(cfg, verbose, "solve")
    ui.print_header(f"SOLVE {cfg.problem.name}")
    _provenance(cfg, ctx)
    with _guard(ctx, "solve"):
        payload = run_solve(ctx)
    if payload["report"] is not None:
        ui.print_metrics_table(payload["report"])
    recurrent = payload.get("recurrent")
    if recurrent:
        ui.print_kv("Recurrent iteration", recurrent)
    ui.print_success(f"Artifacts written to {ctx.out_dir}")


@app.command()
def study(
    config: Optional[str] = ConfigOption,
    out: Optional[Path] = OutOption,
    seed: Optional[int] = SeedOption,
    verbose: bool = VerboseOption,
):
    """Sweep the layer count M (or boundary nodes N) and tabulate errors."""
    cfg = _load(config, out, seed, "study")
    ctx = _context(cfg, verbose, "study")
    ui.print_header(f"STUDY {cfg.problem.name}")
    _provenance(cfg, ctx)
    with _guard(ctx, "study"):
        payload = run_study(ctx)
    ui.print_study_table(payload["rows"], payload["columns"], title=f"Convergence in {payload['axis']}")
    ui.print_success(f"Artifacts written to {ctx.out_dir}")


@app.command()
def inverse(
    config: Optional[str] = ConfigOption,
    out: Optional[Path] = OutOption,
    seed: Optional[int] = SeedOption,
    verbose: bool = VerboseOption,
):
    """Learn the source of a Poisson problem from interior samples."""
    cfg = _load(config, out, seed, "inverse")
    ctx = _context(cfg, verbose, "inverse")
    ui.print_header(f"INVERSE {cfg.problem.name}")
    _provenance(cfg, ctx)
    with _guard(ctx, "inverse"):
        payload = run_inverse(ctx)
    rows = [{"metric": key, **value} for key, value in payload["statistics"].items()]
    ui.print_study_table(rows, ["metric", "mean", "p10", "p90"],
                         title=f"Ensemble of {payload['n_runs']} runs (best: {payload['best_run']})")
    ui.print_success(f"Artifacts written to {ctx.out_dir}")


@app.command()
def validate(
    config: Optional[str] = ConfigOption,
    out: Optional[Path] = OutOption,
    check: Optional[list[str]] = typer.Option(None, "--check", help="Run only these checks (repeatable)"),
    list_only: bool = typer.Option(False, "--list", help="List checks without running them"),
    verbose: bool = VerboseOption,
):
    """Run the kernel and quadrature invariant checks."""
    if list_only:
        ui.print_checks_table(list_checks(), title="Available checks")
        raise typer.Exit(0)
    cfg = _load(config, out, None, "validate", required=False)
    ctx = _context(cfg, verbose, "validate")
    ui.print_header("VALIDATE")
    with _guard(ctx, "validate"):
        payload = run_validate(ctx, check)
    ui.print_checks_table(payload["checks"])
    if not payload["passed"]:
        failed = [c["name"] for c in payload["checks"] if not c["passed"]]
        ui.print_error(f"Failed: {', '.join(failed)}")
        raise typer.Exit(1)
    ui.print_success("All checks passed")


@app.command()
def report(
    artifacts_dir: Path = typer.Option(Path("runs"), "--artifacts", "-a", help="Directory holding preset run outputs"),
    verbose: bool = VerboseOption,
):
    """Grade preset run artifacts and write reproduction.json."""
    ui.set_verbose(verbose)
    result = build_report(artifacts_dir)
    artifacts.write_json(artifacts_dir / artifacts.REPRODUCTION_JSON, result.to_dict())
    ui.print_report_table([r.to_dict() for r in result.records])
    if verbose:
        for record in result.records:
            if record.missing:
                ui.debug(f"{record.criterion}: missing {', '.join(record.missing)}")
    if result.passed:
        ui.print_success("All criteria passed")
    else:
        counts = result.to_dict()["counts"]
        summary = f"{counts['fail']} failed, {counts['skipped']} skipped"
        if counts["fail"]:
            ui.print_error(summary)
        else:
            ui.print_warning(summary)
        raise typer.Exit(1)


@app.command()
def presets():
    """List shipped presets."""
    for name in preset_names():
        ui.console.print(f"  [{ui.CYAN}]{name}[/]")


def main():
    app()


if __name__ == "__main__":
    main()
