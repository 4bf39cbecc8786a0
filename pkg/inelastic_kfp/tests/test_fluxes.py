import math

import pytest

from inelastic_kfp.exponents import alpha_of_r, c_star_closed, critical_r, kappa
from inelastic_kfp.fluxes import (
    FluxBox,
    box_independence_check,
    boundary_flux,
    c_star_quadrature,
    edge_fluxes,
    flux_constants,
    zeta_lambda_moment,
)
from inelastic_kfp.utils.helpers import DomainError

M23 = -2.0 / 3.0
PI_OVER_ROOT3 = math.pi / math.sqrt(3.0)


@pytest.fixture
def unit_box():
    return FluxBox(delta=1.0, b=1.0, r=0.1)


def expected_flux(r):
    return 9.0 ** (2.0 / 3.0) * (math.log(r) + PI_OVER_ROOT3)


def test_zeta_lambda_moment():
    """Test the first profile moment: zero width, limit and Cauchy behaviour."""
    assert zeta_lambda_moment(0.0) == 0.0
    assert zeta_lambda_moment(100.0) == pytest.approx(PI_OVER_ROOT3, abs=1e-2)
    # error decays like M^-3
    gaps = [abs(zeta_lambda_moment(m) - PI_OVER_ROOT3) for m in (10.0, 20.0, 40.0)]
    assert gaps[2] < gaps[1] < gaps[0]

    with pytest.raises(DomainError):
        zeta_lambda_moment(-1.0)
    with pytest.raises(DomainError):
        zeta_lambda_moment(2e3)


def test_mass_flux_of_trivial_profile(unit_box):
    """Test that G_(-2/3) carries 9^(2/3)(log r + pi/sqrt(3)) through the box."""
    flux = boundary_flux(M23, unit_box)
    assert flux == pytest.approx(-2.115, rel=1e-3)
    assert flux == pytest.approx(expected_flux(0.1), rel=1e-3)
    assert flux == pytest.approx(-kappa(0.1), rel=1e-3)

    at_critical = boundary_flux(M23, FluxBox(1.0, 1.0, critical_r()))
    assert abs(at_critical) < 1e-3


def test_flux_sign_law():
    """Test that the mass flux is negative below r_c and positive above."""
    assert boundary_flux(M23, FluxBox(1.0, 1.0, 0.05)) < 0
    assert boundary_flux(M23, FluxBox(1.0, 1.0, 0.3)) > 0


def test_alpha_profile_carries_no_flux(unit_box):
    """Test that the flux of G_alpha vanishes relative to its edge contributions."""
    fluxes = edge_fluxes(alpha_of_r(0.1), unit_box)
    assert fluxes.scale > 0
    assert abs(fluxes.total) < 1e-6 * fluxes.scale


def test_box_independence():
    """Test that the flux does not depend on the box."""
    report = box_independence_check(M23, 0.1)
    assert len(report.table) == 9
    assert list(report.table.columns) == ["delta", "b", "flux", "scale", "normalized"]
    assert report.max_relative_deviation < 1e-3
    assert report.table["flux"].mean() == pytest.approx(expected_flux(0.1), rel=1e-3)

    alpha_report = box_independence_check(alpha_of_r(0.1), 0.1)
    assert alpha_report.max_normalized < 1e-6


def test_flux_exponent_checked(unit_box):
    """Test that only -2/3 and alpha(r) are accepted."""
    with pytest.raises(DomainError):
        boundary_flux(-0.5, unit_box)
    with pytest.raises(DomainError):
        FluxBox(delta=0.0, b=1.0, r=0.1)


@pytest.mark.parametrize("r", [0.05, 0.1, 0.15])
def test_c_star_quadrature(r):
    """Test the quadrature of C_* against the closed form, and its sign."""
    quadrature = c_star_quadrature(r)
    assert quadrature < 0
    assert quadrature == pytest.approx(c_star_closed(r), rel=1e-3)


def test_c_star_quadrature_rejected():
    """Test the rejected coefficients and integration ranges."""
    with pytest.raises(DomainError):
        c_star_quadrature(0.5)
    with pytest.raises(DomainError):
        c_star_quadrature(0.1, R_max=10.0)


def test_flux_constants():
    """Test the collected constants on both sides of r_c."""
    constants = flux_constants(0.1)
    assert constants.mass_flux == pytest.approx(-constants.kappa, rel=1e-3)
    assert constants.c_star == pytest.approx(c_star_closed(0.1), rel=1e-3)

    supercritical = flux_constants(0.5)
    assert math.isnan(supercritical.c_star)
    assert supercritical.kappa < 0
