"""
Fluxes Module

This module computes boundary-flux integrals of the steady profiles over the
boxes R(delta, b) = {0 <= x^(1/3) <= b^(1/3) delta, -delta <= v <= r delta}
touching the singular point, and the three flux constants built from them:

1. Profile Moments (1 function)
   - zeta_lambda_moment

2. Box Fluxes (3 functions)
   - edge_fluxes
   - boundary_flux
   - box_independence_check

3. Flux Constants (2 functions)
   - c_star_quadrature
   - flux_constants

Total Functions: 6

Note: the flux of a steady solution G through the three edges of the box in
x > 0, with the normal pointing into the box, is
    Q = int_(-delta)^(r delta) v G(X, v) dv - int_0^X d_vG(x, r delta) dx + int_0^X d_vG(x, -delta) dx
with X = b delta^3. For G_(-2/3) it equals 9^(2/3) (log r + pi/sqrt(3)).
"""

import logging
import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
import pandas as pd

from inelastic_kfp.exponents import TRIVIAL_ROOT, alpha_of_r, beta_of_r, c_star_closed, critical_r, kappa
from inelastic_kfp.profiles import g_field, g_velocity_derivative, lambda_profile
from inelastic_kfp.utils.helpers import (
    ConvergenceError,
    DomainError,
    RefinementError,
    dyadic_gauss_legendre,
    gauss_legendre_panels,
    relative_gap,
)

logger = logging.getLogger(__name__)

NINE_TWO_THIRDS = 9.0 ** (2.0 / 3.0)

PANEL_NODES = 20
VERTICAL_PANELS = 50
HORIZONTAL_LEVELS = 40
HORIZONTAL_NODES = 50
REFINEMENT_RTOL = 1e-9

MOMENT_NODES = 16
MOMENT_LIMIT = 1.0e3

CSTAR_UNIT_PANELS = 10
CSTAR_GROWTH = 1.25
CSTAR_TAIL_TOL = 1e-5

BOX_DELTAS = (0.5, 1.0, 2.0)
BOX_ASPECTS = (0.25, 1.0, 4.0)


@dataclass(frozen=True)
class FluxBox:
    """Box {0 <= x^(1/3) <= b^(1/3) delta, -delta <= v <= r delta}."""

    delta: float
    b: float
    r: float

    def __post_init__(self):
        if not (self.delta > 0 and self.b > 0 and self.r > 0):
            raise DomainError(f"flux box needs delta, b, r > 0, got {self}")

    @property
    def x_edge(self) -> float:
        """Position X = b delta^3 of the vertical edge."""
        return self.b * self.delta ** 3


@dataclass(frozen=True)
class EdgeFluxes:
    """Flux contributions of the three edges in x > 0 and their sum."""

    vertical: float
    top: float
    bottom: float

    @property
    def total(self) -> float:
        return self.vertical + self.top + self.bottom

    @property
    def scale(self) -> float:
        """Magnitude of the individual contributions, used to normalize cancelling fluxes."""
        return abs(self.vertical) + abs(self.top) + abs(self.bottom)


@dataclass(frozen=True)
class FluxConstants:
    """Mass flux of G_(-2/3), the pairing constant C_* and kappa = -mass_flux."""

    mass_flux: float
    c_star: float
    kappa: float


@dataclass(frozen=True)
class BoxIndependenceReport:
    """
    Fluxes over the nine boxes (delta, b) in {0.5, 1, 2} x {0.25, 1, 4}.

    Attributes:
        table (pd.DataFrame): Columns delta, b, flux, scale, normalized.
        max_relative_deviation (float): Largest pairwise relative gap of the fluxes.
        max_normalized (float): Largest |flux|/scale over the boxes.
    """

    table: pd.DataFrame
    max_relative_deviation: float
    max_normalized: float


# ---------------------
# 1. Profile Moments
# ---------------------

def zeta_lambda_moment(M: float) -> float:
    """
    First moment int_(-M)^M zeta Lambda_(-2/3)(zeta) d zeta.

    Composite Gauss-Legendre on unit panels; the 1/zeta tails of the two
    sides cancel, so the value tends to pi/sqrt(3) with error O(M^-3).

    Args:
        M (float): Half width, 0 <= M <= 1e3.

    Returns:
        float: The truncated moment.
    """
    if not 0 <= M <= MOMENT_LIMIT:
        raise DomainError(f"M must lie in [0, {MOMENT_LIMIT:g}], got {M}")
    if M == 0:
        return 0.0
    edges = np.linspace(-M, M, 2 * math.ceil(M) + 1)
    nodes, weights = gauss_legendre_panels(edges, MOMENT_NODES)
    return float(weights @ (nodes * lambda_profile(TRIVIAL_ROOT, nodes)))


# ---------------------
# 2. Box Fluxes
# ---------------------

def _vertical_flux(gamma: float, box: FluxBox, panels: int) -> tuple[float, float]:
    neg = np.linspace(-box.delta, 0.0, panels + 1)
    pos = np.linspace(0.0, box.r * box.delta, panels + 1)
    vs = []
    ws = []
    for edges in (neg, pos):
        nodes, weights = gauss_legendre_panels(edges, PANEL_NODES)
        vs.append(nodes)
        ws.append(weights)
    v = np.concatenate(vs)
    w = np.concatenate(ws)
    integrand = v * g_field(gamma, box.x_edge, v)
    return float(w @ integrand), float(w @ np.abs(integrand))


def _horizontal_flux(gamma: float, box: FluxBox, v: float) -> float:
    xs, wx = dyadic_gauss_legendre(HORIZONTAL_LEVELS, HORIZONTAL_NODES, box.x_edge)
    return float(wx @ g_velocity_derivative(gamma, xs, v))


def _check_flux_exponent(gamma: float, r: float) -> None:
    if gamma == TRIVIAL_ROOT:
        return
    alpha = alpha_of_r(r)
    if abs(gamma - alpha) > 1e-9:
        raise DomainError(f"box fluxes are posed for gamma in {{-2/3, alpha(r)={alpha:.12g}}}, got {gamma}")


def edge_fluxes(gamma: float, box: FluxBox) -> EdgeFluxes:
    """
    Flux of G_gamma through each edge of the box in x > 0.

    The vertical edge uses Gauss-Legendre panels on each side of v = 0 and is
    refined once (panels doubled); the horizontal edges use panels halving
    toward the wall x = 0.

    Args:
        gamma (float): -2/3 or alpha_of_r(box.r).
        box (FluxBox): The integration box.

    Returns:
        EdgeFluxes: Vertical, top and bottom contributions.

    Raises:
        RefinementError: If the refined vertical integral disagrees with the coarse one.
    """
    _check_flux_exponent(gamma, box.r)
    coarse, _ = _vertical_flux(gamma, box, VERTICAL_PANELS)
    fine, magnitude = _vertical_flux(gamma, box, 2 * VERTICAL_PANELS)
    if abs(fine - coarse) > REFINEMENT_RTOL * max(magnitude, 1.0):
        raise RefinementError(
            f"vertical edge flux changed by {abs(fine - coarse):.3g} under refinement for {box}", fine
        )
    top = -_horizontal_flux(gamma, box, box.r * box.delta)
    bottom = _horizontal_flux(gamma, box, -box.delta)
    fluxes = EdgeFluxes(vertical=fine, top=top, bottom=bottom)
    logger.debug("edge fluxes for gamma=%g, %s: %s (total %.10g)", gamma, box, fluxes, fluxes.total)
    return fluxes


def boundary_flux(gamma: float, box: FluxBox) -> float:
    """
    Total flux of G_gamma through the edges of the box lying in x > 0.

    Args:
        gamma (float): -2/3 or alpha_of_r(box.r).
        box (FluxBox): The integration box.

    Returns:
        float: The flux; 9^(2/3) (log r + pi/sqrt(3)) for gamma = -2/3 and 0 for gamma = alpha.
    """
    return edge_fluxes(gamma, box).total


def box_independence_check(gamma: float, r: float) -> BoxIndependenceReport:
    """
    Evaluate the flux on nine boxes and report how much it varies.

    Args:
        gamma (float): -2/3 or alpha_of_r(r).
        r (float): Restitution coefficient.

    Returns:
        BoxIndependenceReport: The flux table and its deviation measures.
    """
    rows = []
    for delta in BOX_DELTAS:
        for b in BOX_ASPECTS:
            fluxes = edge_fluxes(gamma, FluxBox(delta, b, r))
            rows.append(
                {
                    "delta": delta,
                    "b": b,
                    "flux": fluxes.total,
                    "scale": fluxes.scale,
                    "normalized": fluxes.total / fluxes.scale,
                }
            )
    table = pd.DataFrame(rows)
    deviation = max(relative_gap(a, b) for a, b in combinations(table["flux"], 2))
    return BoxIndependenceReport(
        table=table,
        max_relative_deviation=deviation,
        max_normalized=float(table["normalized"].abs().max()),
    )


# ---------------------
# 3. Flux Constants
# ---------------------

def _pairing_edges(R: float) -> np.ndarray:
    edges = list(np.arange(0.0, min(R, CSTAR_UNIT_PANELS) + 1e-12, 1.0))
    while edges[-1] * CSTAR_GROWTH < R:
        edges.append(edges[-1] * CSTAR_GROWTH)
    edges.extend([R / 2.0, R])
    return np.unique(np.asarray(edges))


def c_star_quadrature(r: float, R_max: float = 200.0) -> float:
    """
    Independent quadrature estimate of C_*.

        C_* / 9^(2/3) = -lim int_0^R w [Lambda_a(w) Lambda_b(-w) - Lambda_a(-w) Lambda_b(w)] dw
                        - 2 cos(pi (beta + 1/3)) log r

    The 1/w tails of the integrand cancel because K_alpha = K_beta; the limit
    is taken as the mean of the partial integrals over [R/2, R].

    Args:
        r (float): Restitution coefficient in (0, r_c).
        R_max (float): Upper cutoff R, in [50, 500].

    Returns:
        float: C_*.

    Raises:
        ConvergenceError: If the partial integrals still drift between R/2 and R.
    """
    if not 0 < r < critical_r():
        raise DomainError(f"C_* is defined for 0 < r < r_c, got r={r}")
    if not 50.0 <= R_max <= 500.0:
        raise DomainError(f"R_max must lie in [50, 500], got {R_max}")
    alpha = alpha_of_r(r)
    beta = beta_of_r(r)

    nodes, weights = gauss_legendre_panels(_pairing_edges(R_max), PANEL_NODES)
    integrand = nodes * (
        lambda_profile(alpha, nodes) * lambda_profile(beta, -nodes)
        - lambda_profile(alpha, -nodes) * lambda_profile(beta, nodes)
    )
    half = nodes <= R_max / 2.0
    partial_half = float(weights[half] @ integrand[half])
    tail = ~half
    partial_full = partial_half + float(weights[tail] @ integrand[tail])
    mean = partial_half + float(weights[tail] @ (integrand[tail] * 2.0 * (R_max - nodes[tail]) / R_max))

    drift = abs(partial_full - partial_half)
    if drift > CSTAR_TAIL_TOL * max(1.0, abs(mean)):
        raise ConvergenceError(
            f"pairing integral drifts by {drift:.3g} between R={R_max / 2:g} and R={R_max:g}; "
            "the exponent tails do not cancel",
            mean,
        )
    c_star = NINE_TWO_THIRDS * (-mean - 2.0 * math.cos(math.pi * (beta + 1.0 / 3.0)) * math.log(r))
    logger.debug("c_star_quadrature(%g) = %.10g (drift %.2g)", r, c_star, drift)
    return c_star


def flux_constants(r: float) -> FluxConstants:
    """
    Collect the flux constants attached to r.

    Args:
        r (float): Restitution coefficient; C_* is reported as NaN unless r < r_c.

    Returns:
        FluxConstants: Quadrature mass flux, C_* (quadrature) and kappa.
    """
    mass_flux = boundary_flux(TRIVIAL_ROOT, FluxBox(1.0, 1.0, r))
    c_star = c_star_quadrature(r) if r < critical_r() else float("nan")
    constants = FluxConstants(mass_flux=mass_flux, c_star=c_star, kappa=kappa(r))
    if abs(constants.mass_flux + constants.kappa) > 1e-3 * max(1.0, abs(constants.kappa)):
        logger.warning("mass flux %.6g does not match -kappa = %.6g", constants.mass_flux, -constants.kappa)
    if r < critical_r():
        closed = c_star_closed(r)
        if relative_gap(closed, c_star) > 1e-3:
            logger.warning("C_* quadrature %.6g differs from closed form %.6g", c_star, closed)
    return constants
