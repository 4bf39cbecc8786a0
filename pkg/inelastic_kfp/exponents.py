"""
Exponents Module

This module solves the transcendental wall-compatibility equations and exposes
the scalar constants that govern the asymptotics near the singular point:

1. Critical Coefficient (1 function)
   - critical_r

2. Exponent Roots (4 functions)
   - exponent_residual
   - alpha_of_r
   - beta_of_r
   - exponent_table

3. Asymptotic Constants (4 functions)
   - k_gamma
   - kappa
   - c_star_closed
   - c_star_alternative

Total Functions: 9

Note: the forward exponent alpha(r) is the root of
    (2 + 3g) log r + log(2 cos(pi (g + 1/3))) = 0
in (-5/6, 1/6) other than the trivial root g = -2/3. The left-hand side is
concave in g, so each side of its maximizer holds exactly one root.
"""

import logging
import math
from dataclasses import dataclass

from scipy.optimize import brentq

from inelastic_kfp.utils.helpers import DegenerateRootError, DomainError

logger = logging.getLogger(__name__)

GAMMA_LOW = -5.0 / 6.0
GAMMA_HIGH = 1.0 / 6.0
TRIVIAL_ROOT = -2.0 / 3.0
NEAR_CRITICAL_BAND = 1e-9
NINE_TWO_THIRDS = 9.0 ** (2.0 / 3.0)


@dataclass(frozen=True)
class ExponentTable:
    """Scalar constants attached to one restitution coefficient r."""

    r: float
    alpha: float
    beta: float
    k_alpha: float
    k_beta: float
    r_c: float
    kappa: float


# ---------------------
# 1. Critical Coefficient
# ---------------------

def critical_r() -> float:
    """
    Return the critical restitution coefficient r_c = exp(-pi/sqrt(3)).

    Below r_c wall bounces accumulate in finite time.

    Returns:
        float: r_c, approximately 0.16303.
    """
    return math.exp(-math.pi / math.sqrt(3.0))


# ---------------------
# 2. Exponent Roots
# ---------------------

def exponent_residual(gamma: float, r: float) -> float:
    """
    Residual (2 + 3 gamma) log r + log(2 cos(pi (gamma + 1/3))) of the exponent equation.

    Args:
        gamma (float): Candidate exponent in (-5/6, 1/6).
        r (float): Restitution coefficient, r > 0.

    Returns:
        float: The residual; zero exactly when r^(2+3 gamma) K_gamma = 1.
    """
    return (2.0 + 3.0 * gamma) * math.log(r) + math.log(k_gamma(gamma))


def _maximizer(r: float) -> float:
    # stationary point of the concave exponent residual
    return math.atan(3.0 * math.log(r) / math.pi) / math.pi - 1.0 / 3.0


def _check_r(r: float) -> None:
    if not r > 0:
        raise DomainError(f"restitution coefficient must be positive, got r={r}")
    if abs(r - critical_r()) <= NEAR_CRITICAL_BAND:
        raise DegenerateRootError(
            f"r={r!r} lies within {NEAR_CRITICAL_BAND:g} of r_c; the exponent roots merge at -2/3"
        )


def _outer_root(func, anchor: float, end: float) -> float:
    """
    Root of a concave function between its maximizer ``anchor`` (where it is
    positive) and the interval end ``end`` (where it tends to -inf).
    """
    delta = abs(end - anchor) / 2.0
    direction = 1.0 if end > anchor else -1.0
    probe = end - direction * delta
    while func(probe) >= 0.0:
        delta /= 8.0
        probe = end - direction * delta
        if delta < 1e-300:
            raise DomainError("failed to bracket the exponent root")
    lo, hi = sorted((anchor, probe))
    return brentq(func, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)


def _inner_root(func, anchor: float, trivial: float) -> float:
    """The nontrivial root lies on the far side of the maximizer from the trivial root."""
    end = GAMMA_HIGH if anchor > trivial else GAMMA_LOW
    return _outer_root(func, anchor, end)


def alpha_of_r(r: float) -> float:
    """
    Solve the exponent equation for the forward exponent alpha(r).

    The root is isolated by locating the maximizer
    x_rc = arctan(3 log r / pi)/pi - 1/3 and bracketing on the side away from
    the trivial root -2/3; Brent's method then refines it to 1e-15.

    Args:
        r (float): Restitution coefficient, r > 0, |r - r_c| > 1e-9.

    Returns:
        float: alpha(r) in (-5/6, 1/6); alpha < -2/3 exactly when r < r_c.

    Raises:
        DegenerateRootError: If r is within 1e-9 of r_c.
    """
    _check_r(r)
    x_rc = _maximizer(r)

    def residual(g: float) -> float:
        return exponent_residual(g, r)

    if residual(x_rc) <= 0.0:
        raise DegenerateRootError(f"exponent residual has no positive maximum at r={r}")
    alpha = _inner_root(residual, x_rc, TRIVIAL_ROOT)
    logger.debug("alpha(%g) = %.15f (maximizer %.6f)", r, alpha, x_rc)
    return alpha


def beta_of_r(r: float) -> float:
    """
    Solve the adjoint exponent equation -3 beta log r + log(2 sin(pi (1/6 - beta))) = 0.

    The adjoint residual is the forward one evaluated at -beta - 2/3, so the
    same isolation strategy applies with the maximizer reflected. The result
    is checked against beta = -alpha - 2/3.

    Args:
        r (float): Restitution coefficient, r > 0, |r - r_c| > 1e-9.

    Returns:
        float: beta(r) in (-5/6, 1/6).
    """
    _check_r(r)
    x_beta = -_maximizer(r) - 2.0 / 3.0

    def residual(b: float) -> float:
        return -3.0 * b * math.log(r) + math.log(2.0 * math.sin(math.pi * (1.0 / 6.0 - b)))

    beta = _inner_root(residual, x_beta, 0.0)
    mirror = -alpha_of_r(r) - 2.0 / 3.0
    if abs(beta - mirror) > 1e-10:
        logger.warning("beta(%g) = %.15f differs from -alpha-2/3 = %.15f", r, beta, mirror)
    return beta


def exponent_table(r: float) -> ExponentTable:
    """
    Collect every scalar constant attached to r.

    Args:
        r (float): Restitution coefficient.

    Returns:
        ExponentTable: Frozen record of r, alpha, beta, K_alpha, K_beta, r_c, kappa.
    """
    alpha = alpha_of_r(r)
    beta = beta_of_r(r)
    return ExponentTable(
        r=r,
        alpha=alpha,
        beta=beta,
        k_alpha=k_gamma(alpha),
        k_beta=k_gamma(beta),
        r_c=critical_r(),
        kappa=kappa(r),
    )


# ---------------------
# 3. Asymptotic Constants
# ---------------------

def k_gamma(gamma: float) -> float:
    """
    Ratio K_gamma = 2 cos(pi (gamma + 1/3)) of the two boundary traces of G_gamma.

    Args:
        gamma (float): Exponent in the open interval (-5/6, 1/6).

    Returns:
        float: K_gamma, strictly positive.

    Raises:
        DomainError: If gamma lies outside the open interval.
    """
    if not GAMMA_LOW < gamma < GAMMA_HIGH:
        raise DomainError(f"gamma={gamma} outside (-5/6, 1/6)")
    return 2.0 * math.cos(math.pi * (gamma + 1.0 / 3.0))


def kappa(r: float) -> float:
    """
    Mass-absorption constant kappa = -9^(2/3) (log r + pi/sqrt(3)).

    Args:
        r (float): Restitution coefficient, r > 0.

    Returns:
        float: kappa; positive exactly when r < r_c.
    """
    if not r > 0:
        raise DomainError(f"restitution coefficient must be positive, got r={r}")
    return -NINE_TWO_THIRDS * (math.log(r) + math.pi / math.sqrt(3.0))


def _check_subcritical(r: float) -> None:
    if not 0 < r < critical_r():
        raise DomainError(f"C_* is defined for 0 < r < r_c, got r={r}")


def c_star_closed(r: float) -> float:
    """
    Closed form of the boundary pairing constant between G_alpha and F_beta:

        C_* / 9^(2/3) = pi/3 (sin(pi alpha) + sqrt(3) cos(pi alpha)) - 2 cos(pi (beta + 1/3)) log r

    Args:
        r (float): Restitution coefficient in (0, r_c).

    Returns:
        float: C_*, strictly negative on (0, r_c).
    """
    _check_subcritical(r)
    alpha = alpha_of_r(r)
    beta = -alpha - 2.0 / 3.0
    bracket = (math.pi / 3.0) * (math.sin(math.pi * alpha) + math.sqrt(3.0) * math.cos(math.pi * alpha))
    return NINE_TWO_THIRDS * (bracket - 2.0 * math.cos(math.pi * (beta + 1.0 / 3.0)) * math.log(r))


def c_star_alternative(r: float) -> float:
    """
    Second algebraic form of C_*, written in zeta = -(alpha + 2/3) > 0:

        C_* / 9^(2/3) = -4pi/3 sin(pi zeta)
                        - 2 cos(pi (zeta + 1/3)) [log(2 cos(pi (zeta + 1/3)))/(3 zeta) + sqrt(3) pi/3]

    Each term is manifestly negative for zeta in (0, 1/6), which is the sign law.

    Args:
        r (float): Restitution coefficient in (0, r_c).

    Returns:
        float: C_*.
    """
    _check_subcritical(r)
    zeta = -(alpha_of_r(r) + 2.0 / 3.0)
    k_zeta = 2.0 * math.cos(math.pi * (zeta + 1.0 / 3.0))
    value = -(4.0 * math.pi / 3.0) * math.sin(math.pi * zeta) - k_zeta * (
        math.log(k_zeta) / (3.0 * zeta) + math.sqrt(3.0) * math.pi / 3.0
    )
    return NINE_TWO_THIRDS * value
