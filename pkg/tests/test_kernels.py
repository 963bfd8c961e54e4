"""Tests for fundamental solutions, Bessel wrappers and the derived kernels."""

import math

import numpy as np
import pytest
from scipy import special

from pfnn.geometry import BoundaryGrid, PolarPoint
from pfnn.kernels import (
    DIAGONAL_LIMIT,
    KernelFamily,
    KernelSpec,
    boundary_flux_matrix,
    d_phi,
    d_phi_polar,
    delta_phi,
    dphi_dn,
    dphi_dn_diag,
    dphi_dn_polar,
    normal_weight,
    phi,
    phi_radial,
)
from pfnn.special_functions import EULER_GAMMA, BesselEval, bessel_k0, bessel_k1
from pfnn.validation import helmholtz_boundary_flux, helmholtz_interior_flux


LAPLACE = KernelSpec.laplace()
HELMHOLTZ = KernelSpec.helmholtz(1.0)


class TestKernelSpec:

    def test_helmholtz_needs_positive_lambda(self):
        """λ ≤ 0 is not a modified Helmholtz operator."""
        with pytest.raises(ValueError, match="lambda > 0"):
            KernelSpec.helmholtz(0.0)
        with pytest.raises(ValueError, match="lambda > 0"):
            KernelSpec(KernelFamily.MODIFIED_HELMHOLTZ, -2.0)

    def test_laplace_takes_zero_lambda(self):
        """Laplace with a shift is a configuration error."""
        with pytest.raises(ValueError, match="lambda = 0"):
            KernelSpec(KernelFamily.LAPLACE, 1.0)

    def test_dict_round_trip(self):
        """to_dict/from_dict keep family and λ."""
        spec = KernelSpec.helmholtz(2.5)
        assert KernelSpec.from_dict(spec.to_dict()) == spec
        assert spec.label == "helmholtz(lambda=2.5)"


class TestBessel:

    def test_small_argument_asymptotics(self):
        """K0(z) ~ -ln(z/2) - γ and K1(z) ~ 1/z as z -> 0."""
        z = 1e-8
        assert bessel_k0(z) == pytest.approx(-math.log(z / 2) - EULER_GAMMA, rel=1e-12)
        assert bessel_k1(z) == pytest.approx(1.0 / z, rel=1e-12)

    def test_rejects_non_positive_arguments(self):
        """K0 and K1 are singular at 0 and undefined for negative z."""
        with pytest.raises(ValueError, match="positive"):
            bessel_k0(0.0)
        with pytest.raises(ValueError, match="positive"):
            bessel_k1(np.array([1.0, -1.0]))

    def test_vectorized_and_scalar(self):
        """Arrays come back as arrays, scalars as floats."""
        assert isinstance(bessel_k0(1.0), float)
        values = bessel_k1(np.array([0.5, 1.0, 2.0]))
        np.testing.assert_allclose(values, special.k1([0.5, 1.0, 2.0]))

    def test_bessel_eval_records(self):
        """BesselEval validates order and positivity."""
        record = BesselEval.of(1, 2.0)
        assert record.value == pytest.approx(special.k1(2.0))
        with pytest.raises(ValueError, match="orders 0 and 1"):
            BesselEval(2, 1.0, 1.0)


class TestFundamentalSolution:

    def test_laplace_log(self):
        """Φ = ln|x - y|/(2π)."""
        x, y = PolarPoint(0.5, 0.0), PolarPoint(0.5, math.pi)
        assert phi(LAPLACE, x, y) == pytest.approx(math.log(1.0) / (2 * math.pi), abs=1e-15)
        assert phi(LAPLACE, PolarPoint(0.1, 0.0), PolarPoint(0.6, 0.0)) == pytest.approx(math.log(0.5) / (2 * math.pi))

    def test_helmholtz_k0(self):
        """Φ = -K0(√λ|x - y|)/(2π)."""
        assert float(phi_radial(HELMHOLTZ, 0.7)) == pytest.approx(-special.k0(0.7) / (2 * math.pi))

    def test_symmetric(self):
        """Φ(x, y) = Φ(y, x)."""
        a, b = PolarPoint(0.2, 1.0), PolarPoint(0.8, 4.0)
        for spec in (LAPLACE, HELMHOLTZ):
            assert phi(spec, a, b) == pytest.approx(phi(spec, b, a), rel=1e-14)

    def test_singular_at_coincidence(self):
        """Φ(x, x) is rejected rather than returning -inf."""
        with pytest.raises(ValueError, match="singular"):
            phi(LAPLACE, PolarPoint(0.3, 0.3), PolarPoint(0.3, 0.3))


class TestNormalDerivative:

    def test_gauss_identity_inside(self):
        """Σ ∂Φ(x, y_j)/∂n Δθ = 1 for Laplace at interior x."""
        grid = BoundaryGrid(256)
        for r in (0.1, 0.5, 0.8):
            total = dphi_dn_polar(LAPLACE, r, 0.4, grid.thetas).sum() * grid.d_theta
            assert total == pytest.approx(1.0, abs=1e-12)

    def test_helmholtz_flux_closed_form(self):
        """Interior flux equals √λK1(√λ)I0(√λr)."""
        grid = BoundaryGrid(256)
        for r in (0.2, 0.6):
            total = dphi_dn_polar(HELMHOLTZ, r, 1.3, grid.thetas).sum() * grid.d_theta
            assert total == pytest.approx(float(helmholtz_interior_flux(r, 1.0)), abs=1e-12)

    def test_boundary_flux_laplace_constant(self):
        """On the circle the Laplace kernel is identically 1/(4π)."""
        grid = BoundaryGrid(16)
        matrix = boundary_flux_matrix(LAPLACE, grid.thetas, grid.thetas)
        np.testing.assert_allclose(matrix, DIAGONAL_LIMIT)

    def test_boundary_flux_helmholtz(self):
        """Helmholtz diagonal takes the limit and rows sum to the principal value."""
        grid = BoundaryGrid(512)
        matrix = boundary_flux_matrix(HELMHOLTZ, grid.thetas[:4], grid.thetas)
        assert matrix[0, 0] == DIAGONAL_LIMIT
        assert np.all(np.isfinite(matrix))
        sums = matrix.sum(axis=1) * grid.d_theta
        np.testing.assert_allclose(sums, helmholtz_boundary_flux(1.0), atol=1e-6)

    def test_normal_weight_limit(self):
        """√λρK1(√λρ) -> 1 as ρ -> 0, and is 1 at ρ = 0."""
        assert float(normal_weight(HELMHOLTZ, 0.0)) == 1.0
        assert float(normal_weight(HELMHOLTZ, 1e-9)) == pytest.approx(1.0, abs=1e-12)
        assert float(normal_weight(LAPLACE, 0.5)) == 1.0

    def test_pointwise_rejects_interior_y(self):
        """y must lie on the circle for a normal derivative."""
        with pytest.raises(ValueError, match="unit circle"):
            dphi_dn(LAPLACE, PolarPoint(0.2, 0.0), PolarPoint(0.5, 1.0))
        with pytest.raises(ValueError, match="dphi_dn_diag"):
            dphi_dn(LAPLACE, PolarPoint(1.0, 0.0), PolarPoint(1.0, 0.0))
        assert dphi_dn_diag(HELMHOLTZ) == DIAGONAL_LIMIT


class TestJumpFreeKernels:

    def test_d_phi_zero_on_boundary(self):
        """DΦ vanishes when x is on the circle."""
        grid = BoundaryGrid(32)
        np.testing.assert_array_equal(d_phi_polar(HELMHOLTZ, 1.0, 0.3, grid.thetas), 0.0)
        assert d_phi(LAPLACE, PolarPoint(1.0, 0.0), PolarPoint(1.0, 1.0)) == 0.0

    def test_d_phi_pointwise_matches_vectorized(self):
        """Scalar and array forms agree, including y = x*."""
        x = PolarPoint(0.6, 0.0)
        for spec in (LAPLACE, HELMHOLTZ):
            for t in (0.0, 0.5, 3.0):
                expected = float(d_phi_polar(spec, 0.6, 0.0, t))
                assert d_phi(spec, x, PolarPoint(1.0, t)) == pytest.approx(expected, rel=1e-12)

    def test_delta_phi(self):
        """δΦ is Φ(x, y) - Φ(x*, y), zero for boundary x."""
        x, y = PolarPoint(0.5, 0.0), PolarPoint(0.3, 2.0)
        expected = phi(HELMHOLTZ, x, y) - phi(HELMHOLTZ, PolarPoint(1.0, 0.0), y)
        assert delta_phi(HELMHOLTZ, x, y) == pytest.approx(expected)
        assert delta_phi(HELMHOLTZ, PolarPoint(1.0, 0.0), y) == 0.0
        with pytest.raises(ValueError, match="singular"):
            delta_phi(HELMHOLTZ, x, PolarPoint(1.0, 0.0))
