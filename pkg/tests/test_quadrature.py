"""Tests for boundary, grid and graded singular quadrature."""

import math

import numpy as np
import pytest

from pfnn.errors import QuadratureBudgetExceeded
from pfnn.geometry import BoundaryGrid, DiscGrid, PolarPoint
from pfnn.kernels import KernelSpec, phi_polar
from pfnn.quadrature import (
    QuadratureMode,
    QuadratureSpec,
    boundary_integrate,
    disc_area_check,
    disc_integrate_grid,
    disc_integrate_singular,
    graded_breakpoints,
)
from pfnn.validation import helmholtz_unit_source_potential, laplace_unit_source_potential

TIGHT = QuadratureSpec(rel_tol=1e-10, max_subdivisions=16)


class TestQuadratureSpec:

    def test_defaults(self):
        """Adaptive singular rule with rel_tol 1e-8 unless configured."""
        spec = QuadratureSpec()
        assert spec.mode == QuadratureMode.ADAPTIVE_SINGULAR
        assert spec.rel_tol == 1e-8

    def test_rejects_bad_values(self):
        """Non-positive tolerance and zero subdivisions are invalid."""
        with pytest.raises(ValueError, match="rel_tol"):
            QuadratureSpec(rel_tol=0.0)
        with pytest.raises(ValueError, match="max_subdivisions"):
            QuadratureSpec(max_subdivisions=0)

    def test_tightened_reference(self):
        """The reference rule is stricter and deeper."""
        spec = QuadratureSpec(rel_tol=1e-6, max_subdivisions=8)
        tight = spec.tightened()
        assert tight.rel_tol == pytest.approx(1e-6 / 16)
        assert tight.max_subdivisions == 12

    def test_dict_round_trip_with_string_mode(self):
        """from_dict accepts the YAML spelling of the mode."""
        spec = QuadratureSpec.from_dict({"mode": "disc_grid_sum", "rel_tol": 1e-6})
        assert spec.mode == QuadratureMode.DISC_GRID_SUM
        assert QuadratureSpec.from_dict(spec.to_dict()) == spec


def test_boundary_riemann_is_spectral_for_trig():
    """Σ f(θ_i)Δθ integrates cos²θ exactly on enough nodes."""
    grid = BoundaryGrid(16)
    assert boundary_integrate(lambda t: np.cos(t) ** 2, grid) == pytest.approx(math.pi, rel=1e-14)


def test_boundary_integrate_rejects_nan():
    """A non-finite integrand is an error, not a silent NaN."""
    with pytest.raises(ValueError, match="not finite"):
        boundary_integrate(lambda t: np.log(np.sin(t)), BoundaryGrid(8))


def test_disc_grid_sum_shape_checked():
    """Field values must match the grid."""
    grid = DiscGrid.uniform(4, 4)
    with pytest.raises(ValueError, match="shape"):
        disc_integrate_grid(np.ones((3, 4)), grid)


def test_disc_grid_sum_area():
    """A center grid sums r Δr Δθ to the disc area."""
    grid = DiscGrid.uniform(10, 8, "center")
    assert disc_integrate_grid(np.ones(grid.shape), grid) == pytest.approx(math.pi, rel=1e-12)


def test_disc_grid_sum_first_order():
    """Doubling the grid halves the error of the plain grid sum on a smooth integrand."""
    exact = 2.0 * math.pi * 0.5651591039924850  # 2π I1(1)
    sizes = np.array([8, 16, 32, 64])
    errors = []
    for n in sizes:
        grid = DiscGrid.uniform(int(n), int(n))
        x1, _ = grid.cartesian()
        errors.append(abs(disc_integrate_grid(np.exp(x1), grid) - exact))
    slope = np.polyfit(np.log(1.0 / sizes), np.log(errors), 1)[0]
    assert 0.8 <= slope <= 1.2


class TestGradedRule:

    def test_breakpoints_cluster_at_singularity(self):
        """Panels shrink dyadically toward the split point."""
        points = graded_breakpoints(0.0, 1.0, [0.5], depth=4)
        assert 0.5 in points
        assert points[0] == 0.0 and points[-1] == 1.0
        smallest = np.min(np.diff(points))
        assert smallest == pytest.approx(0.5 * 2.0 ** -4)

    def test_area(self):
        """∫Ω 1 = π."""
        assert disc_area_check() == pytest.approx(math.pi, rel=1e-10)

    def test_polynomial_exact(self):
        """∫Ω x1² dy = π/4."""
        value = disc_integrate_singular(lambda r, t: (r * np.cos(t)) ** 2, PolarPoint(0.3, 1.0))
        assert value == pytest.approx(math.pi / 4, rel=1e-10)

    @pytest.mark.parametrize("r", [0.2, 0.5, 0.9])
    def test_laplace_unit_source(self, r):
        """∫Ω ln|x - y|/(2π) dy = (r² - 1)/4."""
        spec = KernelSpec.laplace()
        value = disc_integrate_singular(lambda rr, tt: phi_polar(spec, r, 0.7, rr, tt), PolarPoint(r, 0.7), TIGHT)
        assert value == pytest.approx(float(laplace_unit_source_potential(r)), abs=1e-8)

    def test_helmholtz_unit_source(self):
        """∫Ω -K0(|x - y|)/(2π) dy matches the I0/K1 closed form."""
        spec = KernelSpec.helmholtz(1.0)
        value = disc_integrate_singular(lambda rr, tt: phi_polar(spec, 0.4, 2.0, rr, tt), PolarPoint(0.4, 2.0), TIGHT)
        assert value == pytest.approx(float(helmholtz_unit_source_potential(0.4, 1.0)), abs=1e-8)

    def test_budget_exceeded_reports_estimate(self):
        """One refinement level cannot confirm convergence."""
        spec = QuadratureSpec(max_subdivisions=1)
        with pytest.raises(QuadratureBudgetExceeded) as exc_info:
            disc_integrate_singular(lambda r, t: np.ones_like(r), PolarPoint(0.5, 0.0), spec)
        assert exc_info.value.levels == 1
        assert exc_info.value.estimate == pytest.approx(math.pi)

    def test_non_finite_integrand_rejected(self):
        """NaN at a node is an error."""
        with pytest.raises(ValueError, match="not finite"):
            disc_integrate_singular(lambda r, t: np.full_like(r, np.nan), PolarPoint(0.5, 0.0))
