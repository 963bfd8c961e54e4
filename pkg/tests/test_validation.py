"""Tests for the invariant checks."""

import pytest

from pfnn.validation import (
    CHECKS,
    ValidationSettings,
    bessel_oracle,
    helmholtz_boundary_flux,
    laplace_unit_source_potential,
    list_checks,
    run_checks,
)


def test_closed_forms():
    """Spot values of the oracles."""
    assert laplace_unit_source_potential(0.0) == pytest.approx(-0.25)
    assert laplace_unit_source_potential(1.0) == 0.0
    assert bessel_oracle(0, 1.0) == pytest.approx(0.42102443824070834, rel=1e-15)
    assert helmholtz_boundary_flux(1.0) == pytest.approx(0.6019072301972346 * 1.2660658777520082 - 0.5, rel=1e-12)


@pytest.mark.parametrize("name", ["gauss_interior", "gauss_boundary", "helmholtz_flux_interior",
                                  "helmholtz_flux_boundary", "bessel_derivative", "dphi_vanishes"])
def test_fast_checks_pass(name):
    """Kernel identities hold at the default node count."""
    [result] = run_checks(ValidationSettings(), [name])
    assert result["name"] == name
    assert result["passed"], result


def test_bessel_oracle_check():
    [result] = run_checks(names=["bessel_oracle"])
    assert result["passed"]
    assert result["value"] <= result["tolerance"]


def test_coarse_grid_fails_gauss():
    """Eight nodes cannot resolve the kernel at r = 0.9."""
    [result] = run_checks(ValidationSettings(boundary_nodes=8), ["gauss_interior"])
    assert not result["passed"]
    assert result["value"] > result["tolerance"]


def test_unknown_check():
    with pytest.raises(ValueError, match="Unknown checks: nope"):
        run_checks(names=["gauss_interior", "nope"])


def test_list_checks():
    """Listing names every registered check with a description."""
    listed = list_checks()
    assert [c["name"] for c in listed] == list(CHECKS)
    assert all(c["detail"] for c in listed)
