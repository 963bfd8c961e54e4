"""
Inverse source problem for Δu = ψ: learn ψ from interior samples of u.

For fixed geometry, boundary data and solver settings, the solution at any point is affine
in the source values on the solver grid: û = Aψ + c. The map is assembled once from the
grid-sum operator, the Fredholm net's propagation matrix P (β_M = P g) and the potential
layer, and training runs Levenberg-Marquardt on

    L(θ) = (1/N) Σ_i (û(x_i; ψ_θ) - ũ_i)² + λ_reg Σ_k ψ_θ(y_k)² w_k

with ψ_θ a one-hidden-layer tanh network in Cartesian coordinates.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg

from . import ui
from .errors import TrainingError
from .events import NULL_EMITTER, MetricsEmitter
from .fredholm_net import DEFAULT_KAPPA, bie_kernel_matrix, boundary_values, build_fredholm_net, forward
from .geometry import BOUNDARY_SNAP, BoundaryGrid, DiscGrid
from .kernels import KernelSpec, boundary_flux_matrix, d_phi_polar
from .potential import SolutionField
from .problems import Fn2
from .volume import GridSumOperator
from .workers import map_ordered

DEFAULT_HIDDEN = 20
DEFAULT_ITERS = 600
DEFAULT_LAMBDA_REG = 1e-12

INITIAL_DAMPING = 1e-3
DAMPING_FACTOR = 10.0
MAX_DAMPING = 1e16


# ============================================================================
# SOURCE MODEL
# ============================================================================

@dataclass
class SourceModel:
    """ψ_θ(x) = w₂ᵀ tanh(W₁x + b₁) + b₀."""
    hidden_weights: np.ndarray  # (n_hidden, 2)
    hidden_biases: np.ndarray   # (n_hidden,)
    output_weights: np.ndarray  # (n_hidden,)
    output_bias: float

    def __post_init__(self):
        self.hidden_weights = np.asarray(self.hidden_weights, dtype=float).reshape(-1, 2)
        n = self.hidden_weights.shape[0]
        self.hidden_biases = np.asarray(self.hidden_biases, dtype=float).reshape(n)
        self.output_weights = np.asarray(self.output_weights, dtype=float).reshape(n)
        self.output_bias = float(self.output_bias)
        if not np.all(np.isfinite(self.to_vector())):
            raise ValueError("SourceModel parameters must be finite")

    @property
    def n_hidden(self) -> int:
        return self.hidden_weights.shape[0]

    @property
    def n_params(self) -> int:
        return 4 * self.n_hidden + 1

    @classmethod
    def random(cls, rng: np.random.Generator, n_hidden: int = DEFAULT_HIDDEN, scale: float = 1.0) -> "SourceModel":
        return cls.from_vector(rng.uniform(-scale, scale, 4 * n_hidden + 1), n_hidden)

    @classmethod
    def zeros(cls, n_hidden: int = DEFAULT_HIDDEN) -> "SourceModel":
        return cls.from_vector(np.zeros(4 * n_hidden + 1), n_hidden)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.hidden_weights.ravel(), self.hidden_biases, self.output_weights,
                               [self.output_bias]])

    @classmethod
    def from_vector(cls, vector: np.ndarray, n_hidden: int = DEFAULT_HIDDEN) -> "SourceModel":
        vector = np.asarray(vector, dtype=float)
        if vector.size != 4 * n_hidden + 1:
            raise ValueError(f"Expected {4 * n_hidden + 1} parameters, got {vector.size}")
        h = n_hidden
        return cls(vector[: 2 * h].reshape(h, 2), vector[2 * h: 3 * h], vector[3 * h: 4 * h], vector[4 * h])

    def _hidden(self, x1, x2) -> np.ndarray:
        x1 = np.asarray(x1, dtype=float).ravel()
        x2 = np.asarray(x2, dtype=float).ravel()
        return np.tanh(np.outer(x1, self.hidden_weights[:, 0]) + np.outer(x2, self.hidden_weights[:, 1])
                       + self.hidden_biases[None, :])

    def __call__(self, x1, x2) -> np.ndarray:
        shape = np.broadcast(x1, x2).shape
        x1, x2 = np.broadcast_arrays(x1, x2)
        return (self._hidden(x1, x2) @ self.output_weights + self.output_bias).reshape(shape)

    def jacobian(self, x1, x2) -> np.ndarray:
        """∂ψ/∂θ at each point, shape (n_points, n_params), in to_vector() order."""
        x1 = np.asarray(x1, dtype=float).ravel()
        x2 = np.asarray(x2, dtype=float).ravel()
        h = self._hidden(x1, x2)
        dh = (1.0 - h * h) * self.output_weights[None, :]
        n_pts = x1.size
        jac = np.empty((n_pts, self.n_params))
        n = self.n_hidden
        w_part = jac[:, : 2 * n].reshape(n_pts, n, 2)
        w_part[:, :, 0] = dh * x1[:, None]
        w_part[:, :, 1] = dh * x2[:, None]
        jac[:, : 2 * n] = w_part.reshape(n_pts, 2 * n)
        jac[:, 2 * n: 3 * n] = dh
        jac[:, 3 * n: 4 * n] = h
        jac[:, 4 * n] = 1.0
        return jac

    def to_dict(self) -> dict:
        return {
            "hidden_weights": self.hidden_weights.tolist(),
            "hidden_biases": self.hidden_biases.tolist(),
            "output_weights": self.output_weights.tolist(),
            "output_bias": self.output_bias,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SourceModel":
        return cls(data["hidden_weights"], data["hidden_biases"], data["output_weights"], data["output_bias"])


# ============================================================================
# DATA AND THE AFFINE MAP
# ============================================================================

def grid_points(grid: DiscGrid) -> tuple[np.ndarray, np.ndarray]:
    """Interior nodes row by row, then the r = 1 row at the grid angles (SolutionField layout)."""
    radii = np.append(grid.radii[grid.interior_rows], 1.0)
    R, T = np.meshgrid(radii, grid.thetas, indexing="ij")
    return R.ravel(), T.ravel()


@dataclass(frozen=True, eq=False)
class InverseDataset:
    radii: np.ndarray
    thetas: np.ndarray
    values: np.ndarray
    boundary_f: Optional[Fn2] = None

    def __post_init__(self):
        if not (self.radii.shape == self.thetas.shape == self.values.shape):
            raise ValueError("Dataset points and values must have matching shapes")
        if np.any(self.radii <= 0.0) or np.any(self.radii > 1.0 + BOUNDARY_SNAP):
            raise ValueError("Data points must lie in the closed disc with r > 0")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("Data values must be finite")

    @property
    def size(self) -> int:
        return self.values.size


@dataclass(frozen=True, eq=False)
class AffineSourceMap:
    """û = A ψ + c for ψ sampled on solver_grid (row-major)."""
    matrix: np.ndarray
    offset: np.ndarray
    solver_grid: DiscGrid
    radii: np.ndarray
    thetas: np.ndarray

    @property
    def weights(self) -> np.ndarray:
        return self.solver_grid.cell_weights().ravel()

    def source_values(self, psi) -> np.ndarray:
        x1, x2 = self.solver_grid.cartesian()
        return np.broadcast_to(np.asarray(psi(x1, x2), dtype=float), self.solver_grid.shape).ravel()

    def __call__(self, source: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(source, dtype=float) + self.offset

    def solve(self, psi) -> np.ndarray:
        return self(self.source_values(psi))


def source_to_solution_map(
    radii,
    thetas,
    f: Optional[Fn2],
    solver_grid: DiscGrid,
    boundary_grid: BoundaryGrid,
    kappa: float = DEFAULT_KAPPA,
    n_layers: int = 100,
) -> AffineSourceMap:
    """Affine map from grid source values to û at the points (radii[p], thetas[p])."""
    spec = KernelSpec.laplace()
    radii = np.minimum(np.atleast_1d(np.asarray(radii, dtype=float)), 1.0)
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    nodes = boundary_grid.thetas
    d_theta = boundary_grid.d_theta
    n = boundary_grid.n_nodes

    operator = GridSumOperator(spec, solver_grid)
    boundary_op = operator.matrix(np.ones(n), nodes)            # V(x*_j) at the nodes
    star_op = operator.matrix(np.ones_like(thetas), thetas)     # V(x*) at the points
    point_op = operator.matrix(radii, thetas)                   # V(x)

    kernel = bie_kernel_matrix(spec, boundary_grid)
    f_nodes = boundary_values(f, nodes)
    net = build_fredholm_net(2.0 * f_nodes, kernel, boundary_grid, kappa, n_layers, spec)
    propagation = forward(net, np.eye(n))                        # β_M = P g
    beta_f = propagation @ (2.0 * f_nodes)

    interior = radii < 1.0 - BOUNDARY_SNAP
    d = np.where(interior[:, None], d_phi_polar(spec, radii[:, None], thetas[:, None], nodes[None, :]), 0.0)
    flux = boundary_flux_matrix(spec, thetas, nodes)
    a = d * d_theta + flux * d_theta
    b = 0.5 - d.sum(axis=1) * d_theta

    node_idx = boundary_grid.node_indices(thetas)
    on_node = node_idx >= 0
    k_rows = -2.0 * flux * d_theta                                # Nyström row for β(θ) off the nodes
    k_rows[on_node] = 0.0
    k_rows[np.flatnonzero(on_node), node_idx[on_node]] = 1.0
    q = a + b[:, None] * k_rows

    off = (~on_node).astype(float)
    f_star = boundary_values(f, thetas)
    matrix = -2.0 * (q @ propagation) @ boundary_op - 2.0 * (b * off)[:, None] * star_op + point_op
    offset = q @ beta_f + 2.0 * b * off * f_star
    ui.debug(f"source map: {radii.size} points x {solver_grid.shape} sources, N={n}, M={n_layers}")
    return AffineSourceMap(matrix, offset, solver_grid, radii, thetas)


def make_dataset(source_map: AffineSourceMap, psi_true: Fn2, f: Optional[Fn2] = None) -> InverseDataset:
    """Synthetic observations from the forward map applied to the true source."""
    return InverseDataset(source_map.radii, source_map.thetas, source_map.solve(psi_true), f)


# ============================================================================
# TRAINING
# ============================================================================

def loss(model: SourceModel, data: InverseDataset, source_map: AffineSourceMap, lambda_reg: float) -> float:
    psi = source_map.source_values(model)
    mse = float(np.mean((source_map(psi) - data.values) ** 2))
    return mse + lambda_reg * float(np.sum(psi * psi * source_map.weights))


def _residuals(vector, n_hidden, data, source_map, lambda_reg, with_jacobian: bool):
    model = SourceModel.from_vector(vector, n_hidden)
    x1, x2 = source_map.solver_grid.cartesian()
    psi = model(x1, x2).ravel()
    scale = 1.0 / math.sqrt(data.size)
    reg = math.sqrt(lambda_reg) * np.sqrt(source_map.weights)
    residual = np.concatenate([(source_map(psi) - data.values) * scale, reg * psi])
    if not with_jacobian:
        return residual, None
    jac_psi = model.jacobian(x1, x2)
    jacobian = np.vstack([source_map.matrix @ jac_psi * scale, reg[:, None] * jac_psi])
    return residual, jacobian


@dataclass
class TrainingResult:
    model: SourceModel
    loss: float
    trace: list[float] = field(default_factory=list)
    accepted: int = 0


def lm_train(
    model0: SourceModel,
    data: InverseDataset,
    source_map: AffineSourceMap,
    lambda_reg: float = DEFAULT_LAMBDA_REG,
    iters: int = DEFAULT_ITERS,
    emitter: MetricsEmitter = NULL_EMITTER,
    run: Optional[int] = None,
) -> TrainingResult:
    """
    Levenberg-Marquardt on the stacked residual [data misfit/√N; √λ_reg √w ψ].

    Each step solves the damped least-squares system [J; √μ I] δ = -[r; 0]; μ shrinks by
    DAMPING_FACTOR after an accepted step and grows by it after a rejected one.
    lm_step events carry `run` when given.
    """
    n_hidden = model0.n_hidden
    x = model0.to_vector()
    residual, jacobian = _residuals(x, n_hidden, data, source_map, lambda_reg, True)
    current = float(residual @ residual)
    if not math.isfinite(current):
        raise TrainingError("Initial loss is not finite")
    damping = INITIAL_DAMPING
    trace = [current]
    accepted = 0
    eye = np.eye(x.size)

    for it in range(iters):
        system = np.vstack([jacobian, math.sqrt(damping) * eye])
        rhs = np.concatenate([-residual, np.zeros(x.size)])
        try:
            step = linalg.lstsq(system, rhs, lapack_driver="gelsd")[0]
        except (linalg.LinAlgError, ValueError):
            step = None
        if step is not None and np.all(np.isfinite(step)):
            candidate = x + step
            new_residual, _ = _residuals(candidate, n_hidden, data, source_map, lambda_reg, False)
            new_loss = float(new_residual @ new_residual)
        else:
            new_loss = math.inf
        if new_loss < current:
            x = candidate
            residual, jacobian = _residuals(x, n_hidden, data, source_map, lambda_reg, True)
            current = new_loss
            damping = max(damping / DAMPING_FACTOR, 1e-15)
            accepted += 1
            emitter.emit("lm_step", {"run": run, "iteration": it + 1, "loss": current, "damping": damping})
        else:
            damping *= DAMPING_FACTOR
            if damping > MAX_DAMPING:
                trace.append(current)
                break
        trace.append(current)

    if not math.isfinite(current):
        raise TrainingError("Training ended with a non-finite loss", trace)
    return TrainingResult(SourceModel.from_vector(x, n_hidden), current, trace, accepted)


# ============================================================================
# ENSEMBLE
# ============================================================================

STAT_KEYS = (
    "train_mse", "train_linf",
    "test_mae_interior", "test_linf_interior", "test_mae_boundary", "test_linf_boundary",
)


def reconstructed_field(model: SourceModel, source_map: AffineSourceMap, grid: DiscGrid,
                        exact: Optional[Fn2] = None) -> SolutionField:
    """û on a grid whose points were laid out by grid_points()."""
    values = source_map.solve(model).reshape(-1, grid.thetas.size)
    solution = SolutionField(grid, values[:-1], values[-1])
    if exact is not None:
        solution.attach_exact(exact)
    return solution


def run_metrics(model: SourceModel, data: InverseDataset, train_map: AffineSourceMap,
                test_map: AffineSourceMap, test_grid: DiscGrid, exact: Fn2) -> dict:
    misfit = train_map.solve(model) - data.values
    test = reconstructed_field(model, test_map, test_grid, exact)
    interior = np.abs(test.interior_values - test.exact_interior)
    boundary = np.abs(test.boundary_values - test.exact_boundary)
    return {
        "train_mse": float(np.mean(misfit ** 2)),
        "train_linf": float(np.max(np.abs(misfit))),
        "test_mae_interior": float(np.mean(interior)),
        "test_linf_interior": float(np.max(interior)),
        "test_mae_boundary": float(np.mean(boundary)),
        "test_linf_boundary": float(np.max(boundary)),
    }


def summarize(runs: list[dict]) -> dict:
    """mean, p10 and p90 per metric."""
    stats = {}
    for key in STAT_KEYS:
        values = np.array([run[key] for run in runs], dtype=float)
        stats[key] = {
            "mean": float(np.mean(values)),
            "p10": float(np.percentile(values, 10)),
            "p90": float(np.percentile(values, 90)),
        }
    return stats


@dataclass
class EnsembleResult:
    runs: list[dict]
    statistics: dict
    best_index: int
    best_model: SourceModel
    traces: list[list[float]]

    def to_dict(self) -> dict:
        return {
            "n_runs": len(self.runs),
            "best_run": self.best_index,
            "statistics": self.statistics,
            "runs": self.runs,
        }


def run_ensemble(
    n_runs: int,
    seed_base: int,
    data: InverseDataset,
    train_map: AffineSourceMap,
    test_map: AffineSourceMap,
    test_grid: DiscGrid,
    exact: Fn2,
    lambda_reg: float = DEFAULT_LAMBDA_REG,
    iters: int = DEFAULT_ITERS,
    n_hidden: int = DEFAULT_HIDDEN,
    workers: Optional[int] = 1,
    emitter: MetricsEmitter = NULL_EMITTER,
) -> EnsembleResult:
    """Independent seeded runs; run i starts from uniform[-1, 1] parameters drawn with seed_base + i."""
    if n_runs < 1:
        raise ValueError(f"n_runs must be >= 1, got {n_runs}")

    def one(run: int):
        rng = np.random.default_rng(seed_base + run)
        result = lm_train(SourceModel.random(rng, n_hidden), data, train_map, lambda_reg, iters, emitter, run)
        record = {"run": run, "seed": seed_base + run, "loss": result.loss, "accepted_steps": result.accepted}
        record.update(run_metrics(result.model, data, train_map, test_map, test_grid, exact))
        ui.debug(f"inverse run {run}: train mse {record['train_mse']:.3e}, test L∞ {record['test_linf_interior']:.3e}")
        return record, result

    outcomes = map_ordered(one, range(n_runs), workers)
    runs = [record for record, _ in outcomes]
    best = min(range(n_runs), key=lambda i: runs[i]["train_mse"])
    return EnsembleResult(
        runs=runs,
        statistics=summarize(runs),
        best_index=best,
        best_model=outcomes[best][1].model,
        traces=[result.trace for _, result in outcomes],
    )
