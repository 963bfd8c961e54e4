"""
Recurrent solver for semi-linear problems Δu = F(x, u).

Each outer step solves the linear problem

    Δu_{n+1} - λu_{n+1} = ψ_n,    ψ_n = -λu_n + F(x, u_n),    u_{n+1} = f on the circle

with a modified-Helmholtz Fredholm net. ψ_n is only known on the grid, so the volume
potential is the plain grid sum over the solution grid.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import ui
from .errors import RecurrentDivergenceError
from .events import NULL_EMITTER, MetricsEmitter
from .fredholm_net import DEFAULT_KAPPA, boundary_values
from .geometry import BoundaryGrid, DiscGrid
from .kernels import KernelSpec
from .potential import SolutionField, solve_field
from .problems import Fn2, Fn3, ForwardProblem
from .quadrature import QuadratureMode, QuadratureSpec
from .volume import GridSource, VolumePotential

DEFAULT_EARLY_STOP = 1e-10

# Consecutive growing updates that count as divergence.
DIVERGENCE_STREAK = 3


@dataclass(frozen=True)
class SemiLinearProblem:
    nonlinearity: Fn3
    f: Optional[Fn2]
    lam: float
    n_outer: int = 12
    u0: Optional[Fn2] = None
    exact: Optional[Fn2] = None
    early_stop: Optional[float] = DEFAULT_EARLY_STOP

    def __post_init__(self):
        if not self.lam > 0.0:
            raise ValueError(f"Recurrent shift lambda must be > 0, got {self.lam}")
        if int(self.n_outer) < 1:
            raise ValueError(f"n_outer must be >= 1, got {self.n_outer}")

    @property
    def spec(self) -> KernelSpec:
        return KernelSpec.helmholtz(self.lam)

    @classmethod
    def from_problem(cls, problem: ForwardProblem, n_outer: int = 12,
                     early_stop: Optional[float] = DEFAULT_EARLY_STOP) -> "SemiLinearProblem":
        if problem.nonlinearity is None:
            raise ValueError(f"Problem '{problem.name}' has no nonlinearity")
        return cls(problem.nonlinearity, problem.f, problem.spec.lam, n_outer, exact=problem.exact,
                   early_stop=early_stop)


@dataclass
class RecurrentResult:
    iterates: list[SolutionField]
    updates: list[float] = field(default_factory=list)
    stopped_early: bool = False

    @property
    def final(self) -> SolutionField:
        return self.iterates[-1]

    def contraction_ratios(self) -> list[float]:
        """‖u_{n+1} - u_n‖ / ‖u_n - u_{n-1}‖ for consecutive updates."""
        return [b / a for a, b in zip(self.updates[:-1], self.updates[1:]) if a > 0.0]

    def measured_rate(self, skip: int = 1) -> Optional[float]:
        """Largest contraction ratio after the first `skip` ratios, None when too few."""
        ratios = self.contraction_ratios()[skip:]
        return max(ratios) if ratios else None


def _initial_field(problem: SemiLinearProblem, grid: DiscGrid) -> SolutionField:
    interior = grid.radii[grid.interior_rows]
    f_row = boundary_values(problem.f, grid.thetas)
    if problem.u0 is not None:
        R, T = interior[:, None], grid.thetas[None, :]
        values = np.broadcast_to(np.asarray(problem.u0(R * np.cos(T), R * np.sin(T)), dtype=float),
                                 (interior.size, grid.thetas.size)).copy()
    else:
        # constant-in-r extension of the boundary data
        values = np.repeat(f_row[None, :], interior.size, axis=0)
    return SolutionField(grid, values, f_row)


def source_update(u_n: SolutionField, nonlinearity: Fn3, lam: float) -> GridSource:
    """ψ_n = -λu_n + F(x, u_n) on every node of the solution grid."""
    grid = u_n.grid
    u = u_n.grid_values()
    x1, x2 = grid.cartesian()
    if u.shape != grid.shape:
        raise ValueError("Recurrent updates need the field on every grid node")
    values = -lam * u + np.asarray(nonlinearity(x1, x2, u), dtype=float)
    if not np.all(np.isfinite(values)):
        raise ValueError("Nonlinearity produced non-finite source values")
    return GridSource(grid, values)


def _max_update(a: SolutionField, b: SolutionField) -> float:
    return float(max(np.max(np.abs(a.interior_values - b.interior_values), initial=0.0),
                     np.max(np.abs(a.boundary_values - b.boundary_values))))


def _errors(u: SolutionField) -> tuple[Optional[float], Optional[float]]:
    if u.exact_interior is None:
        return None, None
    return (float(np.mean(np.abs(u.interior_values - u.exact_interior))),
            float(np.mean(np.abs(u.boundary_values - u.exact_boundary))))


def rpfnn_solve(
    problem: SemiLinearProblem,
    disc_grid: DiscGrid,
    boundary_grid: BoundaryGrid,
    kappa: float = DEFAULT_KAPPA,
    n_layers: int = 100,
    quad: QuadratureSpec = QuadratureSpec(),
    workers: Optional[int] = 1,
    emitter: MetricsEmitter = NULL_EMITTER,
) -> RecurrentResult:
    """
    Outer iterations u_0 -> u_1 -> ... -> u_{N'}.

    Returns every iterate including u_0. Stops early once the update drops below
    problem.early_stop; raises RecurrentDivergenceError after DIVERGENCE_STREAK
    consecutive growing updates.
    """
    grid_quad = quad.with_mode(QuadratureMode.DISC_GRID_SUM)
    spec = problem.spec
    u = _initial_field(problem, disc_grid)
    if problem.exact is not None:
        u.attach_exact(problem.exact)
    result = RecurrentResult(iterates=[u])
    streak = 0

    for n in range(problem.n_outer):
        psi_n = source_update(u, problem.nonlinearity, problem.lam)
        volume = VolumePotential(spec, psi_n, grid_quad, workers=workers)
        u_next = solve_field(spec, problem.f, psi_n, disc_grid, boundary_grid, kappa, n_layers, grid_quad,
                             exact=problem.exact, workers=workers, volume=volume)
        update = _max_update(u_next, u)
        if result.updates and update > result.updates[-1]:
            streak += 1
        else:
            streak = 0
        result.updates.append(update)
        result.iterates.append(u_next)
        mae_interior, mae_boundary = _errors(u_next)
        emitter.emit("recurrent_iteration", {
            "n": n + 1,
            "max_update": update,
            "mae_interior": mae_interior,
            "mae_boundary": mae_boundary,
        })
        ui.debug(f"recurrent iteration {n + 1}: max update {update:.3e}")
        if streak >= DIVERGENCE_STREAK:
            raise RecurrentDivergenceError(result.iterates, result.updates)
        u = u_next
        if problem.early_stop is not None and update < problem.early_stop:
            result.stopped_early = True
            break
    return result


def step_error(
    problem: SemiLinearProblem,
    disc_grid: DiscGrid,
    boundary_grid: BoundaryGrid,
    kappa: float = DEFAULT_KAPPA,
    n_layers: int = 100,
    quad: QuadratureSpec = QuadratureSpec(),
    workers: Optional[int] = 1,
) -> Optional[float]:
    """
    Error of a single outer step taken from the exact solution.

    The source ψ = -λu + F(x, u) is built from the exact u on the grid, so the exact
    linear solve returns u itself; the L∞ distance of the network's answer from u is the
    per-step error of the discretized solve. None without an exact solution.
    """
    if problem.exact is None:
        return None
    n_interior = int(np.count_nonzero(disc_grid.interior_rows))
    shell = SolutionField(disc_grid, np.zeros((n_interior, disc_grid.thetas.size)), np.zeros(disc_grid.thetas.size))
    shell.attach_exact(problem.exact)
    u_star = SolutionField(disc_grid, shell.exact_interior, shell.exact_boundary)
    psi = source_update(u_star, problem.nonlinearity, problem.lam)
    grid_quad = quad.with_mode(QuadratureMode.DISC_GRID_SUM)
    u_next = solve_field(problem.spec, problem.f, psi, disc_grid, boundary_grid, kappa, n_layers, grid_quad,
                         workers=workers)
    eps = _max_update(u_next, u_star)
    ui.debug(f"recurrent step error at the exact solution: {eps:.3e}")
    return eps
