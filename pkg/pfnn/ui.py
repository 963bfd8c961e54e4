"""
Console output for pfnn: palette, headers, metric tables and progress.

Library modules only talk through debug(); everything else is called from the CLI.
"""

from contextlib import contextmanager
from typing import Callable, Iterator, Optional, Sequence

from rich.box import ROUNDED
from rich.console import Console
from rich.progress import BarColumn, Progress, SpinnerColumn, TextColumn, TimeElapsedColumn
from rich.table import Table
from rich.text import Text

# Palette
PURPLE = "#7b2cbf"
MAGENTA = "#e040fb"
CYAN = "#00ffff"
ELECTRIC_BLUE = "#00d4ff"
GOLD = "#ffd700"
WHITE = "#ffffff"
DIM = "#6b5b7d"
SUCCESS = "#00ff9f"
ERROR = "#ff4757"
WARN = "#ffd93d"

console = Console()

VERBOSE = False


def set_verbose(verbose: bool):
    global VERBOSE
    VERBOSE = verbose


def debug(message: str):
    """Dim diagnostic line, shown only in verbose mode."""
    if VERBOSE:
        console.print(f"[{DIM}]{message}[/]")


def print_header(text: str, style: str = MAGENTA):
    """Print a styled section header."""
    console.print()
    header = Text()
    header.append("▓▒░ ", style=PURPLE)
    header.append(text, style=f"bold {style}")
    header.append(" ░▒▓", style=PURPLE)
    console.print(header)


def print_success(message: str):
    console.print(f"[{SUCCESS}]✓[/] [{WHITE}]{message}[/]")


def print_warning(message: str):
    console.print(f"[{WARN}]⚠ {message}[/]")


def print_error(message: str):
    console.print(f"[{ERROR}]✗ {message}[/]")


def _table(title: Optional[str] = None) -> Table:
    return Table(title=title, box=ROUNDED, border_style=MAGENTA, header_style=f"bold {CYAN}")


def fmt(value) -> str:
    """Numbers in scientific notation, None as a dash."""
    if value is None:
        return "—"
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return f"{value:.3e}"
    return str(value)


def print_kv(title: str, items: dict):
    """Two-column key/value block (run provenance)."""
    table = _table(title)
    table.add_column("Setting", style=WHITE)
    table.add_column("Value", style=ELECTRIC_BLUE)
    for key, value in items.items():
        table.add_row(str(key), fmt(value) if not isinstance(value, (dict, list)) else str(value))
    console.print(table)


def print_metrics_table(report: dict, title: str = "Error metrics"):
    """Measured errors and bounds per region."""
    table = _table(title)
    table.add_column("Region", style=WHITE)
    table.add_column("MAE", justify="right")
    table.add_column("L∞", justify="right")
    table.add_column("Bound", justify="right", style=GOLD)
    table.add_row("interior", fmt(report.get("mae_interior")), fmt(report.get("linf_interior")),
                  fmt(report.get("bound_interior")))
    table.add_row("boundary", fmt(report.get("mae_boundary")), fmt(report.get("linf_boundary")),
                  fmt(report.get("bound_boundary")))
    console.print(table)
    components = report.get("components") or {}
    if components and VERBOSE:
        print_kv("Bound components", components)


def print_study_table(rows: Sequence[dict], columns: Sequence[str], title: str = "Convergence study"):
    table = _table(title)
    for i, column in enumerate(columns):
        table.add_column(column, justify="left" if i == 0 else "right", style=WHITE if i == 0 else None)
    for row in rows:
        table.add_row(*(fmt(row.get(c)) for c in columns))
    console.print(table)


def print_checks_table(checks: Sequence[dict], title: str = "Invariant checks"):
    table = _table(title)
    table.add_column("Check", style=WHITE)
    table.add_column("Result", justify="center")
    table.add_column("Value", justify="right")
    table.add_column("Tolerance", justify="right", style=DIM)
    for check in checks:
        if "passed" not in check:
            result = f"[{DIM}]listed[/]"
        else:
            result = f"[{SUCCESS}]PASS[/]" if check["passed"] else f"[{ERROR}]FAIL[/]"
        table.add_row(check["name"], result, fmt(check.get("value")), fmt(check.get("tolerance")))
    console.print(table)


def print_report_table(records: Sequence[dict], title: str = "Reproduction report"):
    table = _table(title)
    table.add_column("Criterion", style=WHITE)
    table.add_column("Target", justify="right")
    table.add_column("Measured", justify="right")
    table.add_column("Status", justify="center")
    for record in records:
        status = record.get("status", "skipped")
        color = {"pass": SUCCESS, "fail": ERROR}.get(status, DIM)
        table.add_row(record["name"], fmt(record.get("target_value")), fmt(record.get("measured")),
                      f"[{color}]{status.upper()}[/]")
    console.print(table)


@contextmanager
def progress(description: str, total: int) -> Iterator[Callable[..., None]]:
    """
    Progress bar on a terminal, silent otherwise.

    Yields an advance() callable.
    """
    if not console.is_terminal:
        yield lambda n=1: None
        return
    with Progress(
        SpinnerColumn(style=MAGENTA),
        TextColumn(f"[{WHITE}]{{task.description}}"),
        BarColumn(complete_style=MAGENTA, finished_style=SUCCESS),
        TextColumn(f"[{DIM}]{{task.completed}}/{{task.total}}"),
        TimeElapsedColumn(),
        console=console,
        transient=True,
    ) as bar:
        task = bar.add_task(description, total=total)
        yield lambda n=1: bar.advance(task, n)

