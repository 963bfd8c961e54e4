"""
Kernel and quadrature invariants with closed-form or independent oracles.

Each check returns {name, passed, value, tolerance, detail}; value is the measured
deviation from the oracle.
"""

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import sympy as sp
from .fredholm_net import bie_kernel_matrix, build_fredholm_net, dense_solve, forward
from .geometry import BoundaryGrid, PolarPoint
from .kernels import KernelSpec, boundary_flux_matrix, d_phi_polar, dphi_dn_polar, phi_polar
from .quadrature import QuadratureSpec, disc_integrate_singular
from .special_functions import bessel_i0, bessel_k0, bessel_k1

BESSEL_TOL = 1e-10
DERIVATIVE_TOL = 1e-6
DENSE_TOL = 1e-8
DISC_TOL = 1e-8
HELMHOLTZ_LAMBDA = 1.0


# ============================================================================
# CLOSED FORMS
# ============================================================================

def laplace_unit_source_potential(r):
    """∫Ω (1/2π) ln|x - y| dy for |x| = r ≤ 1."""
    return (np.asarray(r, dtype=float) ** 2 - 1.0) / 4.0


def helmholtz_unit_source_potential(r, lam: float):
    """∫Ω Φ(x, y) dy for Φ = -K0(√λ|x - y|)/(2π) and |x| = r ≤ 1."""
    k = math.sqrt(lam)
    return -(1.0 - k * bessel_k1(k) * bessel_i0(k * np.asarray(r, dtype=float))) / lam


def helmholtz_interior_flux(r, lam: float):
    """∫∂Ω ∂Φ(x, y)/∂n_y dσ_y for |x| = r < 1."""
    k = math.sqrt(lam)
    return k * bessel_k1(k) * bessel_i0(k * np.asarray(r, dtype=float))


def helmholtz_boundary_flux(lam: float) -> float:
    """∫∂Ω ∂Φ(x*, y)/∂n_y dσ_y on the circle (principal value)."""
    k = math.sqrt(lam)
    return float(k * bessel_k1(k) * bessel_i0(k) - 0.5)


def bessel_oracle(order: int, z: float, digits: int = 30) -> float:
    """K_order(z) by arbitrary-precision evaluation."""
    return float(sp.besselk(order, sp.Float(repr(float(z)), digits)).evalf(digits))


# ============================================================================
# CHECKS
# ============================================================================

@dataclass(frozen=True)
class ValidationSettings:
    boundary_nodes: int = 1000
    gauss_tol: float = 1e-6


def _result(name: str, value: float, tolerance: float, detail: str) -> dict:
    return {
        "name": name,
        "passed": bool(np.isfinite(value) and value <= tolerance),
        "value": float(value),
        "tolerance": float(tolerance),
        "detail": detail,
    }


def _interior_points() -> tuple[np.ndarray, np.ndarray]:
    radii = np.array([0.1, 0.3, 0.5, 0.7, 0.9])
    thetas = np.array([0.3, 1.7, 2.9, 4.1, 5.5])
    return radii, thetas


def check_gauss_interior(settings: ValidationSettings) -> dict:
    grid = BoundaryGrid(settings.boundary_nodes)
    radii, thetas = _interior_points()
    sums = dphi_dn_polar(KernelSpec.laplace(), radii[:, None], thetas[:, None], grid.thetas[None, :]).sum(axis=1)
    error = float(np.max(np.abs(sums * grid.d_theta - 1.0)))
    return _result("gauss_interior", error, settings.gauss_tol,
                   f"∫∂Φ/∂n dσ = 1 at r ≤ 0.9, N = {grid.n_nodes}")


def check_gauss_boundary(settings: ValidationSettings) -> dict:
    grid = BoundaryGrid(settings.boundary_nodes)
    thetas = np.array([0.0, 1.1, 3.3])
    sums = boundary_flux_matrix(KernelSpec.laplace(), thetas, grid.thetas).sum(axis=1) * grid.d_theta
    error = float(np.max(np.abs(sums - 0.5)))
    return _result("gauss_boundary", error, settings.gauss_tol, f"∫∂Φ(x*,·)/∂n dσ = ½, N = {grid.n_nodes}")


def check_helmholtz_flux_interior(settings: ValidationSettings) -> dict:
    lam = HELMHOLTZ_LAMBDA
    grid = BoundaryGrid(settings.boundary_nodes)
    radii, thetas = _interior_points()
    spec = KernelSpec.helmholtz(lam)
    sums = dphi_dn_polar(spec, radii[:, None], thetas[:, None], grid.thetas[None, :]).sum(axis=1) * grid.d_theta
    error = float(np.max(np.abs(sums - helmholtz_interior_flux(radii, lam))))
    return _result("helmholtz_flux_interior", error, settings.gauss_tol,
                   f"√λK1(√λ)I0(√λr), λ = {lam}, N = {grid.n_nodes}")


def check_helmholtz_flux_boundary(settings: ValidationSettings) -> dict:
    lam = HELMHOLTZ_LAMBDA
    grid = BoundaryGrid(settings.boundary_nodes)
    spec = KernelSpec.helmholtz(lam)
    sums = boundary_flux_matrix(spec, grid.thetas[:3], grid.thetas).sum(axis=1) * grid.d_theta
    error = float(np.max(np.abs(sums - helmholtz_boundary_flux(lam))))
    return _result("helmholtz_flux_boundary", error, settings.gauss_tol,
                   f"√λK1(√λ)I0(√λ) - ½, λ = {lam}, N = {grid.n_nodes}")


def check_bessel_oracle(settings: ValidationSettings) -> dict:
    z = np.geomspace(1e-8, 50.0, 25)
    worst = 0.0
    for order, fn in ((0, bessel_k0), (1, bessel_k1)):
        for x in z:
            exact = bessel_oracle(order, x)
            worst = max(worst, abs(fn(x) - exact) / abs(exact))
    return _result("bessel_oracle", worst, BESSEL_TOL, "K0, K1 vs 30-digit evaluation on [1e-8, 50]")


def check_bessel_derivative(settings: ValidationSettings) -> dict:
    z = np.geomspace(0.05, 20.0, 15)
    h = 1e-4 * z
    derivative = (bessel_k0(z + h) - bessel_k0(z - h)) / (2.0 * h)
    error = float(np.max(np.abs(bessel_k1(z) + derivative) / bessel_k1(z)))
    return _result("bessel_derivative", error, DERIVATIVE_TOL, "K1 = -K0' by central differences")


def check_dphi_vanishes(settings: ValidationSettings) -> dict:
    grid = BoundaryGrid(settings.boundary_nodes)
    worst = 0.0
    for spec in (KernelSpec.laplace(), KernelSpec.helmholtz(HELMHOLTZ_LAMBDA)):
        on_circle = d_phi_polar(spec, 1.0, 0.4, grid.thetas)
        worst = max(worst, float(np.max(np.abs(on_circle))))
        far = np.abs(np.angle(np.exp(1j * (grid.thetas - 0.4)))) > 0.5
        near_circle = d_phi_polar(spec, 1.0 - 1e-9, 0.4, grid.thetas[far])
        worst = max(worst, float(np.max(np.abs(near_circle))))
    return _result("dphi_vanishes", worst, 1e-6, "DΦ = 0 on the circle and → 0 as r → 1 off the diagonal")


def check_fnn_vs_dense(settings: ValidationSettings) -> dict:
    grid = BoundaryGrid(32)
    worst = 0.0
    for spec in (KernelSpec.laplace(), KernelSpec.helmholtz(HELMHOLTZ_LAMBDA)):
        kernel = bie_kernel_matrix(spec, grid)
        g = 1.0 + 2.0 * np.cos(grid.thetas) - np.sin(3.0 * grid.thetas)
        net = build_fredholm_net(g, kernel, grid, 0.5, 5000, spec)
        beta = forward(net).values
        worst = max(worst, float(np.max(np.abs(beta - dense_solve(g, kernel, grid)))))
    return _result("fnn_vs_dense", worst, DENSE_TOL, "M = 5000 forward pass vs direct solve, N = 32")


def check_disc_log_potential(settings: ValidationSettings) -> dict:
    quad = QuadratureSpec(rel_tol=1e-10, max_subdivisions=16)
    worst = 0.0
    for r, theta in ((0.5, 0.0), (0.25, 2.0), (0.8, 4.5)):
        x = PolarPoint(r, theta)
        laplace = disc_integrate_singular(
            lambda rr, tt: phi_polar(KernelSpec.laplace(), r, theta, rr, tt), x, quad)
        helmholtz = disc_integrate_singular(
            lambda rr, tt: phi_polar(KernelSpec.helmholtz(HELMHOLTZ_LAMBDA), r, theta, rr, tt), x, quad)
        worst = max(worst, abs(laplace - laplace_unit_source_potential(r)),
                    abs(helmholtz - helmholtz_unit_source_potential(r, HELMHOLTZ_LAMBDA)))
    return _result("disc_log_potential", worst, DISC_TOL, "∫Φ dy against the unit-source closed forms")


CHECKS: dict[str, tuple[str, Callable[[ValidationSettings], dict]]] = {
    "gauss_interior": ("Gauss identity inside the disc", check_gauss_interior),
    "gauss_boundary": ("Gauss identity on the circle", check_gauss_boundary),
    "helmholtz_flux_interior": ("Modified-Helmholtz flux inside the disc", check_helmholtz_flux_interior),
    "helmholtz_flux_boundary": ("Modified-Helmholtz flux on the circle", check_helmholtz_flux_boundary),
    "bessel_oracle": ("K0/K1 against high-precision values", check_bessel_oracle),
    "bessel_derivative": ("K1 = -K0'", check_bessel_derivative),
    "dphi_vanishes": ("DΦ vanishes on the boundary", check_dphi_vanishes),
    "fnn_vs_dense": ("Fredholm net vs dense solve", check_fnn_vs_dense),
    "disc_log_potential": ("Unit-source disc potentials", check_disc_log_potential),
}


def list_checks() -> list[dict]:
    return [{"name": name, "detail": description} for name, (description, _) in CHECKS.items()]


def run_checks(settings: ValidationSettings = ValidationSettings(), names=None) -> list[dict]:
    selected = list(CHECKS) if not names else list(names)
    unknown = [n for n in selected if n not in CHECKS]
    if unknown:
        raise ValueError(f"Unknown checks: {', '.join(unknown)}")
    return [CHECKS[name][1](settings) for name in selected]
