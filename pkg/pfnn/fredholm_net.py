"""
Fredholm networks for the boundary integral equation on the unit circle.

The density solves β = g + K̃β with K(θ_i, θ_j) = -2 ∂Φ(x*_i, y_j)/∂n_y and K̃ = K Δθ.
A network of M identical affine layers replays the Krasnoselskii-Mann iteration

    β_{m+1} = (1 - κ) β_m + κ (g + K̃ β_m),    β_0 = 0,

so the hidden weight is W = (1 - κ) I + κ K̃ and the bias is κ g. The map g -> β_M is
linear, which lets forward() propagate a matrix of inhomogeneities at once.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, Optional

import numpy as np
from scipy import linalg

from . import ui
from .errors import DivergenceError
from .geometry import BoundaryGrid, normalize_angle
from .kernels import KernelSpec, boundary_flux_matrix
from .quadrature import QuadratureSpec
from .volume import Source, VolumePotential

DEFAULT_KAPPA = 0.5

# forward() aborts once ‖state‖∞ passes this.
DIVERGENCE_GUARD = 1e12

# Cartesian boundary data f(x1, x2).
BoundaryFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


def boundary_values(f: Optional[BoundaryFn], thetas) -> np.ndarray:
    thetas = np.asarray(thetas, dtype=float)
    if f is None:
        return np.zeros_like(thetas)
    values = np.broadcast_to(np.asarray(f(np.cos(thetas), np.sin(thetas)), dtype=float), thetas.shape)
    if not np.all(np.isfinite(values)):
        raise ValueError("Boundary data is not finite at every node")
    return np.array(values)


# ============================================================================
# BIE ASSEMBLY
# ============================================================================

@dataclass(eq=False)
class Inhomogeneity:
    """g(θ) = 2(f(θ) - V(1, θ)) at any boundary angle."""
    f: Optional[BoundaryFn]
    volume: VolumePotential

    def __call__(self, thetas, volume_values: Optional[np.ndarray] = None) -> np.ndarray:
        thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
        if volume_values is None:
            volume_values = self.volume.on_boundary(thetas)
        return 2.0 * (boundary_values(self.f, thetas) - volume_values)


def bie_inhomogeneity(
    spec: KernelSpec,
    f: Optional[BoundaryFn],
    psi: Source,
    grid: BoundaryGrid,
    quad: QuadratureSpec = QuadratureSpec(),
    volume: Optional[VolumePotential] = None,
) -> np.ndarray:
    """g at the boundary nodes."""
    if volume is None:
        volume = VolumePotential(spec, psi, quad)
    return Inhomogeneity(f, volume)(grid.thetas)


def bie_kernel_matrix(spec: KernelSpec, grid: BoundaryGrid) -> np.ndarray:
    """K(θ_i, θ_j) = -2 ∂Φ(x*_i, y_j)/∂n_y; the diagonal is -1/(2π)."""
    return -2.0 * boundary_flux_matrix(spec, grid.thetas, grid.thetas)


# ============================================================================
# NETWORK
# ============================================================================

@dataclass(frozen=True, eq=False)
class FredholmNet:
    grid: BoundaryGrid
    kappa: float
    n_layers: int
    kernel: np.ndarray
    g: np.ndarray
    w_first: np.ndarray
    w_hidden: np.ndarray
    b_hidden: np.ndarray
    spec: Optional[KernelSpec] = None
    inhomogeneity: Optional[Callable] = field(default=None, repr=False)

    @property
    def n_nodes(self) -> int:
        return self.grid.n_nodes

    def layer(self, state: np.ndarray, bias: np.ndarray) -> np.ndarray:
        return self.w_hidden @ state + bias

    def w_out_row(self, theta: float) -> np.ndarray:
        """Final-layer weights K(θ, θ_j)Δθ for an evaluation angle (κ = 1)."""
        if self.spec is None:
            raise ValueError("Off-node weights need the kernel spec the net was built from")
        return -2.0 * boundary_flux_matrix(self.spec, [theta], self.grid.thetas)[0] * self.grid.d_theta

    def to_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "n_nodes": self.n_nodes,
            "n_layers": self.n_layers,
            "kernel": self.spec.to_dict() if self.spec is not None else None,
            "w_hidden": self.w_hidden.ravel().tolist(),
            "b_hidden": self.b_hidden.tolist(),
            "g": self.g.tolist(),
        }

    def dump_json(self, path: Path):
        Path(path).write_text(json.dumps(self.to_dict()))


@dataclass(frozen=True, eq=False)
class BoundaryDensity:
    """β_M at the boundary nodes, tied to the net that produced it."""
    grid: BoundaryGrid
    values: np.ndarray
    net: Optional[FredholmNet] = field(default=None, repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape[0] != self.grid.n_nodes:
            raise ValueError(f"Density has {values.shape[0]} values for {self.grid.n_nodes} nodes")
        if not np.all(np.isfinite(values)):
            raise ValueError("Density values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def norm_inf(self) -> float:
        return float(np.max(np.abs(self.values)))

    @property
    def norm_l2(self) -> float:
        """Discrete L2 norm (Σ β² Δθ)^{1/2}."""
        return float(np.sqrt(np.sum(self.values ** 2) * self.grid.d_theta))


def build_fredholm_net(
    g: np.ndarray,
    kernel: np.ndarray,
    grid: BoundaryGrid,
    kappa: float = DEFAULT_KAPPA,
    n_layers: int = 100,
    spec: Optional[KernelSpec] = None,
    inhomogeneity: Optional[Callable] = None,
) -> FredholmNet:
    if not (0.0 < kappa <= 1.0):
        raise ValueError(f"kappa must lie in (0, 1], got {kappa}")
    if int(n_layers) < 1:
        raise ValueError(f"n_layers must be >= 1, got {n_layers}")
    kernel = np.asarray(kernel, dtype=float)
    g = np.asarray(g, dtype=float)
    n = grid.n_nodes
    if kernel.shape != (n, n):
        raise ValueError(f"Kernel matrix shape {kernel.shape} does not match {n} nodes")
    if g.shape[0] != n:
        raise ValueError(f"Inhomogeneity has {g.shape[0]} rows for {n} nodes")
    if not np.all(np.isfinite(kernel)) or not np.all(np.isfinite(g)):
        raise ValueError("Kernel matrix and inhomogeneity must be finite")

    w_hidden = kappa * kernel * grid.d_theta
    w_hidden[np.diag_indices(n)] += 1.0 - kappa
    return FredholmNet(
        grid=grid,
        kappa=float(kappa),
        n_layers=int(n_layers),
        kernel=kernel,
        g=g,
        w_first=np.full(n, kappa),
        w_hidden=w_hidden,
        b_hidden=kappa * g,
        spec=spec,
        inhomogeneity=inhomogeneity,
    )


def iterate_layers(net: FredholmNet, g: Optional[np.ndarray] = None) -> Iterator[np.ndarray]:
    """States β_1 .. β_M; g may be a vector or an (N, k) matrix."""
    g = net.g if g is None else np.asarray(g, dtype=float)
    bias = net.kappa * g
    state = net.w_first.reshape((-1,) + (1,) * (g.ndim - 1)) * g
    yield state
    for layer in range(2, net.n_layers + 1):
        state = net.layer(state, bias)
        norm = float(np.max(np.abs(state))) if state.size else 0.0
        if not np.isfinite(norm) or norm > DIVERGENCE_GUARD:
            raise DivergenceError(layer, norm)
        yield state


def forward(net: FredholmNet, g: Optional[np.ndarray] = None):
    """
    β_M for the net's own inhomogeneity, or the raw state array for a supplied g
    (vector or matrix), which is how the solution map is linearized.
    """
    state = None
    for state in iterate_layers(net, g):
        pass
    if g is not None:
        return state
    ui.debug(f"fredholm net: N={net.n_nodes} M={net.n_layers} kappa={net.kappa} |beta|={np.max(np.abs(state)):.6g}")
    return BoundaryDensity(net.grid, state, net)


def evaluate_density(density: BoundaryDensity, thetas, g_values: Optional[np.ndarray] = None):
    """
    β at arbitrary boundary angles.

    Node angles return the forward values. Other angles apply one unrelaxed layer with the
    evaluation-point weight row: β(θ) = g(θ) + Σ_j K(θ, θ_j)Δθ β_j.
    """
    scalar = np.ndim(thetas) == 0
    thetas = normalize_angle(np.atleast_1d(np.asarray(thetas, dtype=float)))
    idx = density.grid.node_indices(thetas)
    out = np.empty(thetas.shape)
    on_node = idx >= 0
    out[on_node] = density.values[idx[on_node]]
    off = ~on_node
    if np.any(off):
        net = density.net
        if net is None or net.spec is None:
            raise ValueError("Off-node density evaluation needs the net that produced the density")
        if g_values is not None:
            g_off = np.asarray(g_values, dtype=float)[off]
        elif net.inhomogeneity is not None:
            g_off = net.inhomogeneity(thetas[off])
        else:
            raise ValueError("Off-node density evaluation needs g at the requested angles")
        rows = -2.0 * boundary_flux_matrix(net.spec, thetas[off], density.grid.thetas) * density.grid.d_theta
        out[off] = g_off + rows @ density.values
    return float(out[0]) if scalar else out


# ============================================================================
# DIAGNOSTICS
# ============================================================================

def bie_residual(net: FredholmNet, beta) -> float:
    """‖β - (g + K̃β)‖∞ on the nodes."""
    values = beta.values if isinstance(beta, BoundaryDensity) else np.asarray(beta, dtype=float)
    residual = values - (net.g + net.kernel @ values * net.grid.d_theta)
    return float(np.max(np.abs(residual)))


def kernel_operator_norm(kernel: np.ndarray, grid: BoundaryGrid) -> float:
    """q_op = max_i Σ_j |K_ij| Δθ."""
    return float(np.max(np.sum(np.abs(kernel), axis=1)) * grid.d_theta)


def averaged_contraction_rate(net: FredholmNet) -> float:
    """Spectral radius of (1 - κ)I + κK̃, the asymptotic per-layer error factor."""
    return float(np.max(np.abs(linalg.eigvals(net.w_hidden))))


def dense_solve(g: np.ndarray, kernel: np.ndarray, grid: BoundaryGrid) -> np.ndarray:
    """Direct solve of (I - K̃)β = g."""
    n = grid.n_nodes
    system = np.eye(n) - np.asarray(kernel, dtype=float) * grid.d_theta
    return linalg.solve(system, np.asarray(g, dtype=float))


def solve_density(
    spec: KernelSpec,
    f: Optional[BoundaryFn],
    volume: VolumePotential,
    grid: BoundaryGrid,
    kappa: float = DEFAULT_KAPPA,
    n_layers: int = 100,
) -> BoundaryDensity:
    """Assemble g and K for a boundary problem, build the net and run it."""
    inhomogeneity = Inhomogeneity(f, volume)
    g = inhomogeneity(grid.thetas)
    net = build_fredholm_net(g, bie_kernel_matrix(spec, grid), grid, kappa, n_layers, spec, inhomogeneity)
    return forward(net)
