"""
Potential layer: the PDE solution from a boundary density.

For x = (r, θ) with boundary projection x* = (1, θ):

    u(x) = Σ_j (β_j - β*) DΦ(x, y_j) Δθ
         + β* (½ + λ∫Ω δΦ(x, y) dy)
         + ∫Ω Φ(x, y)ψ(y) dy
         + Σ_j β_j ∂Φ(x*, y_j)/∂n Δθ

with β* = β(x*). For Laplace the δΦ term vanishes and the last sum is (1/4π)Σβ_jΔθ.
On the circle DΦ vanishes and u = ½β* + Σ_j β_j ∂Φ(x*, y_j)/∂n Δθ + V(x*).
"""

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import ui
from .fredholm_net import DEFAULT_KAPPA, BoundaryDensity, boundary_values, evaluate_density, solve_density
from .geometry import BOUNDARY_SNAP, BoundaryGrid, DiscGrid, PolarPoint
from .kernels import KernelSpec, boundary_flux_matrix, d_phi_polar, dphi_dn_polar
from .quadrature import QuadratureSpec
from .volume import Source, VolumePotential
from .workers import map_ordered

ExactFn = Callable[[np.ndarray, np.ndarray], np.ndarray]

CSV_COLUMNS = ["r", "theta", "x1", "x2", "u_num"]
CSV_EXACT_COLUMNS = ["u_exact", "abs_err"]


@dataclass(eq=False)
class PotentialLayer:
    """Final layer for one solved density; evaluates u on circles of the disc."""
    spec: KernelSpec
    density: BoundaryDensity
    volume: VolumePotential
    f: Optional[Callable] = None
    workers: Optional[int] = 1

    @property
    def grid(self) -> BoundaryGrid:
        return self.density.grid

    def _boundary_terms(self, thetas: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(β*, Σβ ∂Φ(x*,·)/∂n Δθ, V(x*)) at the given angles, sharing one V(x*) evaluation."""
        v_star = self.volume.on_boundary(thetas)
        g_star = 2.0 * (boundary_values(self.f, thetas) - v_star)
        beta_star = evaluate_density(self.density, thetas, g_values=g_star)
        flux = boundary_flux_matrix(self.spec, thetas, self.grid.thetas) @ self.density.values * self.grid.d_theta
        return beta_star, flux, v_star

    def w_out(self, x: PolarPoint) -> np.ndarray:
        """DΦ(x, y_j)Δθ; zero on the boundary."""
        return d_phi_polar(self.spec, x.r, x.theta, self.grid.thetas) * self.grid.d_theta

    def delta_term(self, r: float) -> float:
        return self.volume.delta_correction(r)

    def evaluate_rows(self, radii, thetas) -> np.ndarray:
        """u on radii × thetas, shape (len(radii), len(thetas))."""
        radii = np.atleast_1d(np.asarray(radii, dtype=float))
        thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
        beta_star, flux, v_star = self._boundary_terms(thetas)
        boundary_row = 0.5 * beta_star + flux + v_star
        interior = radii < 1.0 - BOUNDARY_SNAP
        volume_rows = np.empty((radii.size, thetas.size))
        if np.any(interior):
            volume_rows[interior] = self.volume.rows(radii[interior], thetas)
        beta = self.density.values
        d_theta = self.grid.d_theta

        def row(i: int) -> np.ndarray:
            r = radii[i]
            if not interior[i]:
                return boundary_row
            d = d_phi_polar(self.spec, r, thetas[:, None], self.grid.thetas[None, :])
            jump_free = (d @ beta - beta_star * d.sum(axis=1)) * d_theta
            return jump_free + beta_star * (0.5 + self.delta_term(r)) + volume_rows[i] + flux

        rows = map_ordered(row, range(radii.size), self.workers)
        return np.vstack(rows) if rows else np.empty((0, thetas.size))

    def at_point(self, x: PolarPoint) -> float:
        return float(self.evaluate_rows([x.r], [x.theta])[0, 0])

    def double_layer(self, x: PolarPoint) -> float:
        """Direct form Σ_j β_j ∂Φ(x, y_j)/∂n Δθ + V(x) for interior x."""
        if x.on_boundary:
            raise ValueError("The direct double-layer form is evaluated at interior points only")
        kernel = dphi_dn_polar(self.spec, x.r, x.theta, self.grid.thetas)
        return float(kernel @ self.density.values * self.grid.d_theta + self.volume.at_point(x))


def _check_grid(density: BoundaryDensity, grid: BoundaryGrid):
    if density.grid.n_nodes != grid.n_nodes:
        raise ValueError(f"Density lives on {density.grid.n_nodes} nodes, grid has {grid.n_nodes}")


def _layer_for(spec: KernelSpec, beta: BoundaryDensity, psi: Source, grid: BoundaryGrid, quad: QuadratureSpec,
               f=None, volume: Optional[VolumePotential] = None) -> PotentialLayer:
    _check_grid(beta, grid)
    if volume is None:
        inhomogeneity = beta.net.inhomogeneity if beta.net is not None else None
        volume = getattr(inhomogeneity, "volume", None) or VolumePotential(spec, psi, quad)
        if f is None and inhomogeneity is not None:
            f = getattr(inhomogeneity, "f", None)
    return PotentialLayer(spec, beta, volume, f)


def evaluate_poisson(x: PolarPoint, beta: BoundaryDensity, psi: Source, grid: BoundaryGrid,
                     quad: QuadratureSpec = QuadratureSpec(), f=None) -> float:
    """u(x) for Δu = ψ."""
    return _layer_for(KernelSpec.laplace(), beta, psi, grid, quad, f).at_point(x)


def evaluate_helmholtz(x: PolarPoint, beta: BoundaryDensity, psi: Source, lam: float, grid: BoundaryGrid,
                       quad: QuadratureSpec = QuadratureSpec(), f=None) -> float:
    """u(x) for Δu - λu = ψ."""
    return _layer_for(KernelSpec.helmholtz(lam), beta, psi, grid, quad, f).at_point(x)


def evaluate_double_layer(x: PolarPoint, beta: BoundaryDensity, psi: Source, spec: KernelSpec, grid: BoundaryGrid,
                          quad: QuadratureSpec = QuadratureSpec()) -> float:
    return _layer_for(spec, beta, psi, grid, quad).double_layer(x)


# ============================================================================
# SOLUTION FIELDS
# ============================================================================

@dataclass(eq=False)
class SolutionField:
    """
    u on a disc grid: interior rows (r < 1) plus the boundary row r = 1 at the grid angles.

    A grid whose last row lies on the circle stores that row only in boundary_values.
    """
    grid: DiscGrid
    interior_values: np.ndarray
    boundary_values: np.ndarray
    density: Optional[BoundaryDensity] = field(default=None, repr=False)
    layer: Optional[PotentialLayer] = field(default=None, repr=False)
    exact_interior: Optional[np.ndarray] = None
    exact_boundary: Optional[np.ndarray] = None

    def __post_init__(self):
        n_interior = int(np.count_nonzero(self.grid.interior_rows))
        if self.interior_values.shape != (n_interior, self.grid.thetas.size):
            raise ValueError("Interior values do not match the grid's interior rows")
        if self.boundary_values.shape != (self.grid.thetas.size,):
            raise ValueError("Boundary values do not match the grid angles")
        if not (np.all(np.isfinite(self.interior_values)) and np.all(np.isfinite(self.boundary_values))):
            raise ValueError("Solution field contains non-finite values")

    @property
    def interior_radii(self) -> np.ndarray:
        return self.grid.radii[self.grid.interior_rows]

    def grid_values(self) -> np.ndarray:
        """Values on every grid node, shape grid.shape."""
        if self.grid.has_boundary_row:
            return np.vstack([self.interior_values, self.boundary_values[None, :]])
        return self.interior_values

    def attach_exact(self, exact: ExactFn):
        R = self.interior_radii[:, None]
        T = self.grid.thetas[None, :]
        self.exact_interior = np.broadcast_to(np.asarray(exact(R * np.cos(T), R * np.sin(T)), dtype=float),
                                              self.interior_values.shape).copy()
        self.exact_boundary = boundary_values(exact, self.grid.thetas)
        return self

    def to_csv(self) -> str:
        """CSV text: r,theta,x1,x2,u_num[,u_exact,abs_err], interior rows then the boundary row."""
        has_exact = self.exact_interior is not None
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(CSV_COLUMNS + (CSV_EXACT_COLUMNS if has_exact else []))
        blocks = [(self.interior_radii, self.interior_values, self.exact_interior),
                  (np.array([1.0]), self.boundary_values[None, :],
                   self.exact_boundary[None, :] if has_exact else None)]
        for radii, values, exact in blocks:
            for i, r in enumerate(radii):
                for j, t in enumerate(self.grid.thetas):
                    u = values[i, j]
                    row = [repr(float(r)), repr(float(t)), repr(float(r * np.cos(t))), repr(float(r * np.sin(t))),
                           repr(float(u))]
                    if has_exact:
                        row += [repr(float(exact[i, j])), repr(float(abs(u - exact[i, j])))]
                    writer.writerow(row)
        return buffer.getvalue()


def field_from_layer(layer: PotentialLayer, disc_grid: DiscGrid) -> SolutionField:
    radii = disc_grid.radii[disc_grid.interior_rows]
    values = layer.evaluate_rows(np.append(radii, 1.0), disc_grid.thetas)
    return SolutionField(disc_grid, values[:-1], values[-1], layer.density, layer)


def solve_field(
    spec: KernelSpec,
    f,
    psi: Source,
    disc_grid: DiscGrid,
    boundary_grid: BoundaryGrid,
    kappa: float = DEFAULT_KAPPA,
    n_layers: int = 100,
    quad: QuadratureSpec = QuadratureSpec(),
    exact: Optional[ExactFn] = None,
    workers: Optional[int] = 1,
    volume: Optional[VolumePotential] = None,
) -> SolutionField:
    """BIE inhomogeneity, Fredholm net, forward pass, then the potential layer on every node."""
    if volume is None:
        volume = VolumePotential(spec, psi, quad, grid=disc_grid, workers=workers)
    ui.debug(f"solve_field: {spec.label} grid={disc_grid.shape} N={boundary_grid.n_nodes} M={n_layers}")
    density = solve_density(spec, f, volume, boundary_grid, kappa, n_layers)
    layer = PotentialLayer(spec, density, volume, f, workers)
    solution = field_from_layer(layer, disc_grid)
    if exact is not None:
        solution.attach_exact(exact)
    return solution
