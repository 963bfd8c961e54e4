"""
Measured errors and a-priori bounds for Fredholm-network solutions.

The domain bound assembles

    ‖u - ũ‖_Ω ≤ e_β (½ + 2‖∫|DΦ|‖ + ‖λ∫δΦ‖ + ‖∫|∂Φ(x*,·)/∂n|‖) + ‖β_M‖D1 + D2 + D3 + D4

and the boundary bound

    ‖f - ũ‖_∂Ω ≤ e_β (½ + ‖∫|∂Φ(x*,·)/∂n|‖) + D2(∂Ω) + D4(∂Ω)

where e_β estimates ‖β - β_M‖ and D1..D4 are discretization errors of the four integrals
(coarse rule against a refined reference) sampled on circles of the solution grid.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import linalg

from . import ui
from .errors import DegenerateBoundError
from .fredholm_net import (
    BoundaryDensity,
    averaged_contraction_rate,
    bie_kernel_matrix,
    bie_residual,
    boundary_values,
    dense_solve,
    evaluate_density,
    kernel_operator_norm,
)
from .geometry import BOUNDARY_SNAP, BoundaryGrid
from .kernels import boundary_flux_matrix, d_phi_polar
from .potential import PotentialLayer, SolutionField
from .quadrature import QuadratureMode
from .volume import GridSource, VolumePotential, delta_correction

DEFAULT_SAMPLE_ANGLES = 32
DEFAULT_SAMPLE_RADII = 24

# Boundary refinement factor for the D3/D4 reference sums.
BOUNDARY_REFINEMENT = 16

# Refinement of the disc grid for the grid-sum D2 reference.
GRID_REFINEMENT = 4

COMPONENT_KEYS = ("fnn_term", "D1", "D2", "D3", "D4", "beta_norm")


@dataclass
class ErrorReport:
    mae_interior: float
    linf_interior: float
    mae_boundary: float
    linf_boundary: float
    bound_interior: Optional[float] = None
    bound_boundary: Optional[float] = None
    components: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "mae_interior": self.mae_interior,
            "linf_interior": self.linf_interior,
            "mae_boundary": self.mae_boundary,
            "linf_boundary": self.linf_boundary,
            "bound_interior": self.bound_interior,
            "bound_boundary": self.bound_boundary,
            "components": {**{key: None for key in COMPONENT_KEYS}, **self.components},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ErrorReport":
        return cls(
            mae_interior=data["mae_interior"],
            linf_interior=data["linf_interior"],
            mae_boundary=data["mae_boundary"],
            linf_boundary=data["linf_boundary"],
            bound_interior=data.get("bound_interior"),
            bound_boundary=data.get("bound_boundary"),
            components=data.get("components", {}),
        )

    @property
    def bounds_hold(self) -> Optional[bool]:
        if self.bound_interior is None or self.bound_boundary is None:
            return None
        return self.bound_interior >= self.linf_interior and self.bound_boundary >= self.linf_boundary


# ============================================================================
# MEASURED ERRORS
# ============================================================================

def metrics(solution: SolutionField, exact: Optional[Callable] = None) -> ErrorReport:
    """MAE and L∞ over interior nodes (r < 1) and the boundary row separately."""
    if exact is not None:
        solution.attach_exact(exact)
    if solution.exact_interior is None:
        raise ValueError("metrics() needs a reference solution")
    interior = np.abs(solution.interior_values - solution.exact_interior)
    boundary = np.abs(solution.boundary_values - solution.exact_boundary)
    return ErrorReport(
        mae_interior=float(np.mean(interior)) if interior.size else 0.0,
        linf_interior=float(np.max(interior, initial=0.0)),
        mae_boundary=float(np.mean(boundary)),
        linf_boundary=float(np.max(boundary)),
    )


# ============================================================================
# BOUNDS
# ============================================================================

def fnn_bound(q_eff: float, kappa: float, n_layers: int, tg_minus_g: float, d_const: float,
              interval_len: float, n_nodes: int) -> float:
    """
    (e^{1-q}/(1-q)) (‖Tg - g‖ + D L²/(2n)) e^{-(1-q) v_M} with v_M = Mκ.
    """
    if not q_eff < 1.0:
        raise DegenerateBoundError(f"Bound is degenerate for q_eff = {q_eff:.6g} >= 1")
    if n_nodes < 1:
        raise ValueError(f"n_nodes must be >= 1, got {n_nodes}")
    gap = 1.0 - q_eff
    v_m = n_layers * kappa
    return math.exp(gap) / gap * (tg_minus_g + d_const * interval_len ** 2 / (2.0 * n_nodes)) * math.exp(-gap * v_m)


def recurrent_bound(eps_pfnn: float, q: float, n: int, init_gap: float) -> float:
    """eps + qⁿ·gap."""
    if not 0.0 < q < 1.0:
        raise DegenerateBoundError(f"Recurrent bound needs q in (0, 1), got {q:.6g}")
    return eps_pfnn + q ** n * init_gap


def domain_bound(components: dict) -> float:
    c = components
    coefficient = 0.5 + 2.0 * c.get("dphi_abs", 0.0) + c.get("delta_sup", 0.0) + c.get("flux_star_abs", 0.0)
    return (c.get("beta_error", 0.0) * coefficient
            + c.get("beta_norm", 0.0) * c.get("D1", 0.0)
            + c.get("D2", 0.0) + c.get("D3", 0.0) + c.get("D4", 0.0))


def boundary_bound(components: dict) -> float:
    c = components
    return (c.get("beta_error", 0.0) * (0.5 + c.get("flux_star_abs", 0.0))
            + c.get("D2_boundary", 0.0) + c.get("D4_boundary", 0.0))


# ============================================================================
# ‖β - β_M‖ ESTIMATE
# ============================================================================

def beta_error_estimate(density: BoundaryDensity) -> dict:
    """
    Algebraic part: residual/(1 - q_op) when q_op < 1, otherwise residual·‖(I - K̃)^{-1}‖∞.
    Discretization part: ‖β_N - β_2N‖∞ from dense solves at the nodes of the coarse grid.
    """
    net = density.net
    if net is None:
        raise ValueError("beta_error_estimate needs the density's net")
    residual = bie_residual(net, density)
    q_op = kernel_operator_norm(net.kernel, net.grid)
    if q_op < 1.0:
        algebraic = residual / (1.0 - q_op)
        resolvent = 1.0 / (1.0 - q_op)
    else:
        system = np.eye(net.n_nodes) - net.kernel * net.grid.d_theta
        resolvent = float(np.max(np.sum(np.abs(linalg.inv(system)), axis=1)))
        algebraic = residual * resolvent

    discretization = 0.0
    if net.spec is not None and net.inhomogeneity is not None:
        fine = BoundaryGrid(2 * net.n_nodes)
        beta_fine = dense_solve(net.inhomogeneity(fine.thetas), bie_kernel_matrix(net.spec, fine), fine)
        beta_coarse = dense_solve(net.g, net.kernel, net.grid)
        discretization = float(np.max(np.abs(beta_fine[::2] - beta_coarse)))

    return {
        "residual": residual,
        "q_op": q_op,
        "resolvent_norm": resolvent,
        "beta_error_algebraic": algebraic,
        "beta_error_discretization": discretization,
        "beta_error": algebraic + discretization,
    }


# ============================================================================
# DISCRETIZATION TERMS
# ============================================================================

def sample_radii(layer_radii: np.ndarray, limit: int = DEFAULT_SAMPLE_RADII) -> np.ndarray:
    """Up to `limit` interior radii, always keeping the outermost one."""
    radii = np.asarray(layer_radii, dtype=float)
    radii = radii[radii < 1.0 - BOUNDARY_SNAP]
    if radii.size <= limit:
        return radii
    idx = np.unique(np.linspace(0, radii.size - 1, limit).round().astype(int))
    return radii[idx]


def _reference_volume(volume: VolumePotential) -> Optional[VolumePotential]:
    if volume.is_zero:
        return None
    if volume.mode == QuadratureMode.ADAPTIVE_SINGULAR:
        return VolumePotential(volume.spec, volume.psi, volume.quad.tightened(), workers=volume.workers)
    if isinstance(volume.psi, GridSource):
        return None  # values exist only on the solver grid
    refined = volume.grid.refined(GRID_REFINEMENT, GRID_REFINEMENT)
    return VolumePotential(volume.spec, volume.psi, volume.quad, grid=refined, workers=volume.workers)


def discretization_terms(layer: PotentialLayer, radii, n_angles: int = DEFAULT_SAMPLE_ANGLES) -> dict:
    """
    D1..D4 on radii × n_angles uniform angles, plus D2/D4 on the circle.

    D2 is None when the source exists only as grid values.
    """
    spec = layer.spec
    density = layer.density
    grid = density.grid
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    thetas = 2.0 * np.pi * (np.arange(n_angles) + 0.5) / n_angles

    fine = grid.refined(BOUNDARY_REFINEMENT)
    v_star_fine = layer.volume.on_boundary(fine.thetas)
    g_fine = 2.0 * (boundary_values(layer.f, fine.thetas) - v_star_fine)
    beta_fine = evaluate_density(density, fine.thetas, g_values=g_fine)
    v_star = layer.volume.on_boundary(thetas)
    g_star = 2.0 * (boundary_values(layer.f, thetas) - v_star)
    beta_star = evaluate_density(density, thetas, g_values=g_star)

    # D4: Σβ ∂Φ(x*,·)/∂n
    coarse_flux = boundary_flux_matrix(spec, thetas, grid.thetas) @ density.values * grid.d_theta
    fine_flux = boundary_flux_matrix(spec, thetas, fine.thetas) @ beta_fine * fine.d_theta
    d4 = float(np.max(np.abs(coarse_flux - fine_flux)))

    # D3: Σ(β - β*)DΦ
    d3 = 0.0
    for r in radii:
        coarse = d_phi_polar(spec, r, thetas[:, None], grid.thetas[None, :])
        ref = d_phi_polar(spec, r, thetas[:, None], fine.thetas[None, :])
        c = (coarse @ density.values - beta_star * coarse.sum(axis=1)) * grid.d_theta
        ref_sum = (ref @ beta_fine - beta_star * ref.sum(axis=1)) * fine.d_theta
        d3 = max(d3, float(np.max(np.abs(c - ref_sum))))

    # D2: ∫Φψ
    reference = _reference_volume(layer.volume)
    if layer.volume.is_zero:
        d2, d2_boundary = 0.0, 0.0
    elif reference is None:
        d2, d2_boundary = None, None
    else:
        d2 = float(np.max(np.abs(layer.volume.rows(radii, thetas) - reference.rows(radii, thetas))))
        d2_boundary = float(np.max(np.abs(v_star - reference.on_boundary(thetas))))

    # D1: λ∫δΦ
    if spec.is_laplace:
        d1 = 0.0
    else:
        tight = layer.volume.quad.tightened().with_mode(QuadratureMode.ADAPTIVE_SINGULAR)
        d1 = max(abs(layer.volume.delta_correction(r) - delta_correction(spec, r, tight)) for r in radii)

    return {"D1": d1, "D2": d2, "D3": d3, "D4": d4, "D2_boundary": d2_boundary, "D4_boundary": d4}


def kernel_sup_terms(layer: PotentialLayer, radii) -> dict:
    """Sup norms of the kernel integrals multiplying ‖β - β_M‖."""
    spec = layer.spec
    grid = layer.grid
    theta0 = np.array([0.5 * grid.d_theta])
    dphi_abs = 0.0
    delta_sup = 0.0
    for r in np.atleast_1d(radii):
        d = d_phi_polar(spec, r, theta0[:, None], grid.thetas[None, :])
        dphi_abs = max(dphi_abs, float(np.sum(np.abs(d)) * grid.d_theta))
        delta_sup = max(delta_sup, abs(layer.volume.delta_correction(r)))
    star = boundary_flux_matrix(spec, theta0, grid.thetas)
    flux_star_abs = float(np.sum(np.abs(star)) * grid.d_theta)
    return {"dphi_abs": dphi_abs, "delta_sup": delta_sup, "flux_star_abs": flux_star_abs}


def error_report(solution: SolutionField, exact: Optional[Callable] = None, with_bounds: bool = True,
                 n_angles: int = DEFAULT_SAMPLE_ANGLES, radii_limit: int = DEFAULT_SAMPLE_RADII) -> ErrorReport:
    """Measured errors, and when possible the bound components and both bounds."""
    report = metrics(solution, exact)
    density = solution.density
    if density is not None:
        report.components["beta_norm"] = density.norm_inf
        report.components["beta_norm_l2"] = density.norm_l2
    if not with_bounds or solution.layer is None:
        return report

    layer = solution.layer
    radii = sample_radii(solution.interior_radii, radii_limit)
    components = dict(report.components)
    components.update(beta_error_estimate(density))
    components.update(kernel_sup_terms(layer, radii))
    components.update(discretization_terms(layer, radii, n_angles))
    net = density.net
    components["fnn_term"] = components["beta_error_algebraic"]
    components.update(fnn_bound_terms(density))
    report.components = components
    if components["D2"] is None:
        ui.debug("error bounds skipped: source known only on the grid")
        return report
    report.bound_interior = domain_bound(components)
    report.bound_boundary = boundary_bound(components)
    ui.debug(f"bounds: interior {report.bound_interior:.3e}, boundary {report.bound_boundary:.3e} (N={net.n_nodes})")
    return report


def fnn_bound_terms(density: BoundaryDensity) -> dict:
    """
    Generic Fredholm-iteration bound for the density solve.

    q_eff is the averaged contraction rate, ‖Tg - g‖ = ‖K̃g‖∞ and D is a finite-difference
    estimate of max |∂/∂z (K(x, z)g(z))| along the boundary parameter.
    """
    net = density.net
    q_eff = averaged_contraction_rate(net)
    tg_minus_g = float(np.max(np.abs(net.kernel @ net.g * net.grid.d_theta)))
    weighted = net.kernel * net.g[None, :]
    d_const = float(np.max(np.abs(np.diff(weighted, axis=1, append=weighted[:, :1])))) / net.grid.d_theta
    terms = {"q_eff": q_eff, "tg_minus_g": tg_minus_g, "d_const": d_const, "fnn_bound": None}
    if q_eff < 1.0:
        terms["fnn_bound"] = fnn_bound(q_eff, net.kappa, net.n_layers, tg_minus_g, d_const, 2.0 * math.pi,
                                       net.n_nodes)
    return terms
