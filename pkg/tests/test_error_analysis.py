"""Tests for measured errors, bound formulas and the assembled error report."""

import math

import numpy as np
import pytest

from pfnn.error_analysis import (
    COMPONENT_KEYS,
    ErrorReport,
    beta_error_estimate,
    boundary_bound,
    domain_bound,
    error_report,
    fnn_bound,
    metrics,
    recurrent_bound,
    sample_radii,
)
from pfnn.errors import DegenerateBoundError
from pfnn.fredholm_net import BoundaryDensity
from pfnn.geometry import BoundaryGrid, DiscGrid
from pfnn.potential import SolutionField, solve_field
from pfnn.problems import poisson_ex1


@pytest.fixture(scope="module")
def poisson_solution():
    problem = poisson_ex1()
    return solve_field(problem.spec, problem.f, problem.psi, DiscGrid.uniform(5, 16), BoundaryGrid(48), 0.5, 60,
                       exact=problem.exact)


class TestMetrics:

    def test_interior_and_boundary_separate(self):
        """MAE and L∞ are taken over interior nodes and the boundary row separately."""
        grid = DiscGrid.uniform(3, 2)
        field = SolutionField(grid, np.array([[1.0, 0.0], [0.0, 0.0]]), np.array([0.5, 0.0]))
        report = metrics(field, lambda x1, x2: np.zeros_like(x1))
        assert report.mae_interior == pytest.approx(0.25)
        assert report.linf_interior == 1.0
        assert report.mae_boundary == pytest.approx(0.25)
        assert report.linf_boundary == 0.5

    def test_needs_reference(self):
        """Without an exact solution there is nothing to measure."""
        field = SolutionField(DiscGrid.uniform(1, 2, "center"), np.zeros((1, 2)), np.zeros(2))
        with pytest.raises(ValueError, match="reference solution"):
            metrics(field)

    def test_report_dict_round_trip(self):
        """Serialized reports list every component key."""
        report = ErrorReport(1e-3, 2e-3, 0.0, 0.0, 5e-3, 1e-9, {"D1": 0.0})
        data = report.to_dict()
        assert set(COMPONENT_KEYS) <= set(data["components"])
        assert ErrorReport.from_dict(data).bound_interior == 5e-3
        assert report.bounds_hold

    def test_bounds_hold_unknown_without_bounds(self):
        """bounds_hold is None when no bound was computed."""
        assert ErrorReport(0.1, 0.2, 0.0, 0.0).bounds_hold is None


class TestBoundFormulas:

    def test_fnn_bound_decays_with_layers(self):
        """More layers give an exponentially smaller bound."""
        shallow = fnn_bound(0.5, 0.5, 10, 1.0, 1.0, 2 * math.pi, 100)
        deep = fnn_bound(0.5, 0.5, 40, 1.0, 1.0, 2 * math.pi, 100)
        assert deep == pytest.approx(shallow * math.exp(-0.5 * 0.5 * 30))

    def test_fnn_bound_value(self):
        """(e^{1-q}/(1-q))(‖Tg - g‖ + DL²/2n)e^{-(1-q)Mκ}."""
        value = fnn_bound(0.0, 1.0, 1, 2.0, 0.0, 1.0, 1)
        assert value == pytest.approx(math.e * 2.0 * math.exp(-1.0))

    def test_fnn_bound_degenerate(self):
        """q_eff ≥ 1 has no bound."""
        with pytest.raises(DegenerateBoundError, match="q_eff"):
            fnn_bound(1.0, 0.5, 10, 1.0, 1.0, 1.0, 10)

    def test_recurrent_bound(self):
        """eps + qⁿ·gap, defined only for 0 < q < 1."""
        assert recurrent_bound(1e-6, 0.5, 3, 1.0) == pytest.approx(1e-6 + 0.125)
        for q in (0.0, 1.0, 1.5):
            with pytest.raises(DegenerateBoundError):
                recurrent_bound(1e-6, q, 3, 1.0)

    def test_domain_and_boundary_assembly(self):
        """Bounds are linear in the components."""
        components = {"beta_error": 2.0, "dphi_abs": 1.0, "delta_sup": 0.5, "flux_star_abs": 0.5,
                      "beta_norm": 3.0, "D1": 0.1, "D2": 0.01, "D3": 0.02, "D4": 0.03,
                      "D2_boundary": 0.04, "D4_boundary": 0.05}
        assert domain_bound(components) == pytest.approx(2.0 * 3.5 + 0.3 + 0.06)
        assert boundary_bound(components) == pytest.approx(2.0 * 1.0 + 0.09)

    def test_sample_radii_keeps_outermost(self):
        """Subsampling keeps the last interior radius and drops r = 1."""
        radii = np.linspace(0.01, 1.0, 100)
        sampled = sample_radii(radii, 10)
        assert sampled.size <= 10
        assert sampled[-1] == pytest.approx(0.99)
        assert np.all(sampled < 1.0)


class TestErrorReport:

    def test_beta_error_estimate(self, poisson_solution):
        """Residual, operator norm and both error parts are reported."""
        estimate = beta_error_estimate(poisson_solution.density)
        assert estimate["q_op"] == pytest.approx(1.0)
        assert estimate["beta_error"] == pytest.approx(
            estimate["beta_error_algebraic"] + estimate["beta_error_discretization"])
        assert estimate["residual"] < 1e-12

    def test_beta_error_needs_net(self):
        """A bare density has no residual to measure."""
        with pytest.raises(ValueError, match="net"):
            beta_error_estimate(BoundaryDensity(BoundaryGrid(4), np.zeros(4)))

    def test_full_report(self, poisson_solution):
        """With bounds enabled every component and both bounds are filled in."""
        report = error_report(poisson_solution, n_angles=8, radii_limit=3)
        for key in ("D1", "D2", "D3", "D4", "beta_error", "q_eff", "dphi_abs", "fnn_term"):
            assert report.components[key] is not None
        assert report.components["D1"] == 0.0
        assert math.isfinite(report.bound_interior) and report.bound_interior > 0.0
        assert math.isfinite(report.bound_boundary)
        assert report.linf_interior < 1e-3

    def test_report_without_bounds(self, poisson_solution):
        """Disabled bounds leave only the measured errors and density norms."""
        report = error_report(poisson_solution, with_bounds=False)
        assert report.bound_interior is None
        assert report.components["beta_norm"] == pytest.approx(poisson_solution.density.norm_inf)
