"""Tests for the Fredholm network: BIE assembly, weights, forward pass and diagnostics."""

import math

import numpy as np
import pytest

from pfnn.errors import DivergenceError
from pfnn.fredholm_net import (
    BoundaryDensity,
    averaged_contraction_rate,
    bie_inhomogeneity,
    bie_kernel_matrix,
    bie_residual,
    boundary_values,
    build_fredholm_net,
    dense_solve,
    evaluate_density,
    forward,
    iterate_layers,
    kernel_operator_norm,
    solve_density,
)
from pfnn.geometry import BoundaryGrid
from pfnn.kernels import KernelSpec
from pfnn.validation import helmholtz_unit_source_potential
from pfnn.volume import VolumePotential

LAPLACE = KernelSpec.laplace()
HELMHOLTZ = KernelSpec.helmholtz(1.0)


# ── Helpers ──────────────────────────────────────────────────────────────────

def smooth_g(grid: BoundaryGrid) -> np.ndarray:
    return 1.0 + 2.0 * np.cos(grid.thetas) - np.sin(3.0 * grid.thetas)


def net_for(spec: KernelSpec, n_nodes: int = 24, kappa: float = 0.5, n_layers: int = 200):
    grid = BoundaryGrid(n_nodes)
    return build_fredholm_net(smooth_g(grid), bie_kernel_matrix(spec, grid), grid, kappa, n_layers, spec)


# ── Tests ─────────────────────────────────────────────────────────────────────

class TestAssembly:

    def test_laplace_kernel_constant(self):
        """K = -2·(1/4π) everywhere on the circle, diagonal included."""
        grid = BoundaryGrid(8)
        np.testing.assert_allclose(bie_kernel_matrix(LAPLACE, grid), -1.0 / (2.0 * math.pi))

    def test_weights_follow_km_iteration(self):
        """W = (1 - κ)I + κK̃, bias κg and first-layer weight κ."""
        net = net_for(HELMHOLTZ, n_nodes=12, kappa=0.3)
        expected = 0.7 * np.eye(12) + 0.3 * net.kernel * net.grid.d_theta
        np.testing.assert_allclose(net.w_hidden, expected)
        np.testing.assert_allclose(net.b_hidden, 0.3 * net.g)
        np.testing.assert_allclose(net.w_first, 0.3)

    def test_boundary_values_default_zero(self):
        """Missing boundary data is the zero function."""
        np.testing.assert_array_equal(boundary_values(None, [0.0, 1.0]), [0.0, 0.0])
        np.testing.assert_allclose(boundary_values(lambda x1, x2: x1, [0.0, math.pi]), [1.0, -1.0])

    @pytest.mark.parametrize("kwargs, message", [
        ({"kappa": 0.0}, "kappa"),
        ({"kappa": 1.5}, "kappa"),
        ({"n_layers": 0}, "n_layers"),
    ])
    def test_rejects_bad_hyperparameters(self, kwargs, message):
        """κ outside (0, 1] and M < 1 are invalid."""
        grid = BoundaryGrid(4)
        args = {"kappa": 0.5, "n_layers": 3, **kwargs}
        with pytest.raises(ValueError, match=message):
            build_fredholm_net(np.zeros(4), np.zeros((4, 4)), grid, args["kappa"], args["n_layers"])

    def test_rejects_mismatched_shapes(self):
        """Kernel and g must match the grid."""
        grid = BoundaryGrid(4)
        with pytest.raises(ValueError, match="Kernel matrix shape"):
            build_fredholm_net(np.zeros(4), np.zeros((3, 3)), grid)
        with pytest.raises(ValueError, match="rows for 4 nodes"):
            build_fredholm_net(np.zeros(5), np.zeros((4, 4)), grid)

    def test_inhomogeneity_without_source(self):
        """With no source g is twice the boundary data."""
        grid = BoundaryGrid(6)
        f = lambda x1, x2: x1 - 3.0 * x2
        np.testing.assert_allclose(bie_inhomogeneity(LAPLACE, f, None, grid), 2.0 * boundary_values(f, grid.thetas))

    def test_inhomogeneity_subtracts_volume_potential(self):
        """A unit source shifts g by -2V(1, θ)."""
        grid = BoundaryGrid(6)
        g = bie_inhomogeneity(HELMHOLTZ, None, lambda x1, x2: np.ones(np.broadcast(x1, x2).shape), grid)
        np.testing.assert_allclose(g, -2.0 * float(helmholtz_unit_source_potential(1.0, 1.0)), atol=1e-8)


class TestForward:

    def test_single_layer_is_kappa_g(self):
        """β_1 = κg."""
        grid = BoundaryGrid(6)
        g = smooth_g(grid)
        net = build_fredholm_net(g, bie_kernel_matrix(LAPLACE, grid), grid, 0.5, 1, LAPLACE)
        np.testing.assert_allclose(forward(net).values, 0.5 * g)

    @pytest.mark.parametrize("spec", [LAPLACE, HELMHOLTZ], ids=["laplace", "helmholtz"])
    def test_converges_to_dense_solve(self, spec):
        """Deep nets reproduce (I - K̃)⁻¹g."""
        net = net_for(spec)
        beta = forward(net)
        np.testing.assert_allclose(beta.values, dense_solve(net.g, net.kernel, net.grid), atol=1e-10)
        assert bie_residual(net, beta) < 1e-10

    def test_matrix_propagation_is_linear(self):
        """forward(net, I) is the propagation matrix P with β_M = Pg."""
        net = net_for(HELMHOLTZ, n_nodes=10, n_layers=15)
        propagation = forward(net, np.eye(10))
        np.testing.assert_allclose(propagation @ net.g, forward(net).values, atol=1e-13)

    def test_layer_states(self):
        """iterate_layers yields M states."""
        net = net_for(LAPLACE, n_nodes=6, n_layers=7)
        assert len(list(iterate_layers(net))) == 7

    def test_error_non_increasing_in_layers(self):
        """‖β_m - β‖ does not grow with m for a non-expansive kernel."""
        net = net_for(HELMHOLTZ, n_nodes=32, n_layers=40)
        exact = dense_solve(net.g, net.kernel, net.grid)
        errors = [np.max(np.abs(state - exact)) for state in iterate_layers(net)]
        assert all(b <= a + 1e-14 for a, b in zip(errors[:-1], errors[1:]))

    def test_divergence_guard(self):
        """An expansive weight matrix trips the guard instead of overflowing."""
        grid = BoundaryGrid(4)
        kernel = 5.0 * np.eye(4) / grid.d_theta
        net = build_fredholm_net(np.ones(4), kernel, grid, 0.5, 100)
        with pytest.raises(DivergenceError) as exc_info:
            forward(net)
        assert exc_info.value.layer < 100
        assert exc_info.value.norm > 1e12


class TestDensity:

    def test_density_validation(self):
        """Density size must match the grid and be finite."""
        grid = BoundaryGrid(4)
        with pytest.raises(ValueError, match="for 4 nodes"):
            BoundaryDensity(grid, np.zeros(3))
        with pytest.raises(ValueError, match="finite"):
            BoundaryDensity(grid, np.array([0.0, np.nan, 0.0, 0.0]))

    def test_norms(self):
        """‖β‖∞ and the discrete L2 norm."""
        grid = BoundaryGrid(4)
        density = BoundaryDensity(grid, np.array([1.0, -2.0, 0.0, 0.0]))
        assert density.norm_inf == 2.0
        assert density.norm_l2 == pytest.approx(math.sqrt(5.0 * math.pi / 2.0))

    def test_on_node_evaluation(self):
        """Node angles return the stored values."""
        grid = BoundaryGrid(8)
        density = BoundaryDensity(grid, np.arange(8.0))
        np.testing.assert_array_equal(evaluate_density(density, grid.thetas[[1, 5]]), [1.0, 5.0])
        assert evaluate_density(density, grid.thetas[3]) == 3.0

    def test_off_node_needs_net(self):
        """A bare density cannot be interpolated."""
        density = BoundaryDensity(BoundaryGrid(8), np.zeros(8))
        with pytest.raises(ValueError, match="needs the net"):
            evaluate_density(density, 0.1)

    def test_nystrom_consistent_at_nodes(self):
        """The off-node formula reproduces β at the nodes once the net has converged."""
        grid = BoundaryGrid(20)
        f = lambda x1, x2: x1 ** 2 - x2
        density = solve_density(HELMHOLTZ, f, VolumePotential(HELMHOLTZ, None), grid, 0.5, 200)
        g_nodes = 2.0 * boundary_values(f, grid.thetas)
        nystrom = g_nodes + density.net.kernel @ density.values * grid.d_theta
        np.testing.assert_allclose(nystrom, density.values, atol=1e-10)
        off = evaluate_density(density, np.array([0.05, 3.0]))
        assert np.all(np.isfinite(off))


class TestDiagnostics:

    def test_laplace_operator_norm_is_one(self):
        """max_i Σ_j |K_ij|Δθ = 1 for the Laplace kernel."""
        grid = BoundaryGrid(16)
        assert kernel_operator_norm(bie_kernel_matrix(LAPLACE, grid), grid) == pytest.approx(1.0)

    def test_averaged_rate_laplace(self):
        """With κ = ½ the Laplace map contracts non-constant modes by ½ per layer."""
        net = net_for(LAPLACE, n_nodes=16)
        assert averaged_contraction_rate(net) == pytest.approx(0.5)
