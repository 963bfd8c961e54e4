"""Tests for the potential layer and solution fields on small grids."""

import csv
import io
import math

import numpy as np
import pytest

from pfnn.error_analysis import metrics
from pfnn.fredholm_net import BoundaryDensity
from pfnn.geometry import BoundaryGrid, DiscGrid, PolarPoint
from pfnn.kernels import KernelSpec
from pfnn.potential import (
    CSV_COLUMNS,
    SolutionField,
    evaluate_double_layer,
    evaluate_helmholtz,
    evaluate_poisson,
    solve_field,
)
from pfnn.problems import helmholtz_ex1, poisson_ex1
from pfnn.quadrature import QuadratureMode, QuadratureSpec

# 24 grid angles against 80 boundary nodes: only every third angle is a node.
DISC = DiscGrid.uniform(6, 24)
BOUNDARY = BoundaryGrid(80)


@pytest.fixture(scope="module")
def poisson_solution():
    problem = poisson_ex1()
    return solve_field(problem.spec, problem.f, problem.psi, DISC, BOUNDARY, 0.5, 80, exact=problem.exact)


@pytest.fixture(scope="module")
def helmholtz_solution():
    problem = helmholtz_ex1(1.0)
    return solve_field(problem.spec, problem.f, problem.psi, DISC, BOUNDARY, 0.5, 80, exact=problem.exact)


class TestForwardSolves:

    def test_poisson_interior_accuracy(self, poisson_solution):
        """Δu = 2x1 recovers ¼x1(r² - 1) inside the disc."""
        report = metrics(poisson_solution)
        assert report.linf_interior < 1e-4
        assert report.mae_interior < report.linf_interior + 1e-16

    def test_poisson_boundary_exact(self, poisson_solution):
        """The boundary row reproduces f = 0 on and off the nodes."""
        assert np.max(np.abs(poisson_solution.boundary_values)) < 1e-10

    def test_helmholtz_interior_accuracy(self, helmholtz_solution):
        """Δu - u = ψ recovers x1³ - 2x2²."""
        assert metrics(helmholtz_solution).linf_interior < 1e-4

    def test_helmholtz_boundary_exact(self, helmholtz_solution):
        """Boundary values equal x1³ + 2x1² - 2 to rounding."""
        report = metrics(helmholtz_solution)
        assert report.linf_boundary < 1e-10

    def test_grid_sum_mode_runs(self):
        """A plain grid sum gives a coarser but finite solution."""
        problem = poisson_ex1()
        quad = QuadratureSpec(mode=QuadratureMode.DISC_GRID_SUM)
        grid = DiscGrid.uniform(12, 32, "center")
        solution = solve_field(problem.spec, problem.f, problem.psi, grid, BoundaryGrid(32), 0.5, 60, quad,
                               exact=problem.exact)
        assert metrics(solution).linf_interior < 5e-2


class TestPointEvaluation:

    def test_evaluate_poisson_matches_field(self, poisson_solution):
        """Pointwise evaluation agrees with the grid row."""
        r, theta = DISC.radii[2], DISC.thetas[5]
        value = evaluate_poisson(PolarPoint(r, theta), poisson_solution.density, poisson_ex1().psi, BOUNDARY)
        assert value == pytest.approx(poisson_solution.interior_values[2, 5], abs=1e-12)

    def test_evaluate_helmholtz_matches_exact(self, helmholtz_solution):
        """Helmholtz evaluation at an off-grid point is close to the exact solution."""
        problem = helmholtz_ex1(1.0)
        x = PolarPoint(0.45, 0.9)
        value = evaluate_helmholtz(x, helmholtz_solution.density, problem.psi, 1.0, BOUNDARY)
        x1, x2 = 0.45 * math.cos(0.9), 0.45 * math.sin(0.9)
        assert value == pytest.approx(float(problem.exact(x1, x2)), abs=1e-4)

    def test_double_layer_form_agrees_inside(self, poisson_solution):
        """Away from the circle the direct form equals the jump-free form."""
        x = PolarPoint(0.5, 1.0)
        direct = evaluate_double_layer(x, poisson_solution.density, poisson_ex1().psi, KernelSpec.laplace(), BOUNDARY)
        assert direct == pytest.approx(poisson_solution.layer.at_point(x), abs=1e-10)

    def test_double_layer_rejects_boundary(self, poisson_solution):
        """The direct form is not evaluated on the circle."""
        with pytest.raises(ValueError, match="interior"):
            poisson_solution.layer.double_layer(PolarPoint(1.0, 0.0))

    def test_density_grid_mismatch(self, poisson_solution):
        """A density is evaluated only with its own boundary grid."""
        with pytest.raises(ValueError, match="nodes"):
            evaluate_poisson(PolarPoint(0.5, 0.0), poisson_solution.density, None, BoundaryGrid(10))

    def test_w_out_vanishes_on_circle(self, poisson_solution):
        """Final-layer weights are zero for boundary points."""
        np.testing.assert_array_equal(poisson_solution.layer.w_out(PolarPoint(1.0, 0.4)), 0.0)


class TestSolutionField:

    def test_endpoint_grid_layout(self, poisson_solution):
        """Endpoint grids keep r = 1 only in the boundary row."""
        assert poisson_solution.interior_values.shape == (5, 24)
        assert poisson_solution.grid_values().shape == DISC.shape

    def test_csv_columns_and_rows(self, poisson_solution):
        """CSV lists interior rows then the boundary row with exact values attached."""
        rows = list(csv.reader(io.StringIO(poisson_solution.to_csv())))
        assert rows[0] == CSV_COLUMNS + ["u_exact", "abs_err"]
        assert len(rows) == 1 + 6 * 24
        assert float(rows[-1][0]) == 1.0

    def test_rejects_non_finite(self):
        """Fields with NaN are invalid."""
        grid = DiscGrid.uniform(2, 3, "center")
        with pytest.raises(ValueError, match="non-finite"):
            SolutionField(grid, np.full((2, 3), np.nan), np.zeros(3))

    def test_rejects_wrong_shape(self):
        """Interior block must match the interior rows."""
        grid = DiscGrid.uniform(2, 3)
        with pytest.raises(ValueError, match="interior rows"):
            SolutionField(grid, np.zeros((2, 3)), np.zeros(3))

    def test_attach_exact(self):
        """attach_exact fills both exact blocks."""
        grid = DiscGrid.uniform(2, 4, "center")
        field = SolutionField(grid, np.zeros((2, 4)), np.zeros(4))
        field.attach_exact(lambda x1, x2: x1)
        np.testing.assert_allclose(field.exact_boundary, np.cos(grid.thetas), atol=1e-15)
        assert field.exact_interior.shape == (2, 4)

    def test_bare_density_field_csv_without_exact(self):
        """No exact solution means no error columns."""
        grid = DiscGrid.uniform(1, 2, "center")
        field = SolutionField(grid, np.zeros((1, 2)), np.zeros(2), density=BoundaryDensity(BoundaryGrid(2), [0, 0]))
        assert field.to_csv().splitlines()[0] == ",".join(CSV_COLUMNS)
