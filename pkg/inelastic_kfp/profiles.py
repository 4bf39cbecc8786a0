"""
Profiles Module

This module evaluates the self-similar profiles of the steady problem near the
singular point (x, v) = (0, 0) and provides residual verifiers for the
equations and boundary conditions they satisfy:

1. One-Dimensional Profiles (3 functions)
   - lambda_profile
   - lambda_derivative
   - lambda_m23_closed

2. Forward Solutions G_gamma (5 functions)
   - g_gamma
   - g_field
   - g_velocity_derivative
   - boundary_trace
   - steady_bc_residual

3. Adjoint Solutions F_beta (3 functions)
   - f_beta
   - adjoint_profile
   - adjoint_boundary_trace

4. Residual Verifiers (4 functions)
   - lambda_ode_residual
   - kummer_residual
   - steady_residual
   - adjoint_steady_residual

5. Mass Near the Origin (2 functions)
   - origin_mass
   - box_mass

6. Sampling (2 functions)
   - sample_profile
   - sample_g

Total Functions: 19

Note: Lambda_gamma(zeta) = U(-gamma, 2/3, -zeta^3) with zeta = v/(9x)^(1/3),
so that G_gamma(x, v) = x^gamma Lambda_gamma(zeta). The adjoint profile is
F_beta(x, v) = x^beta U(-beta, 2/3, v^3/(9x)) = G_beta(x, -v).
"""

import logging
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
import pandas as pd
from scipy import integrate, special

from inelastic_kfp.exponents import GAMMA_HIGH, GAMMA_LOW, beta_of_r, k_gamma
from inelastic_kfp.specfun import hyp2f0, tricomi_u
from inelastic_kfp.utils.helpers import DomainError, dyadic_gauss_legendre

logger = logging.getLogger(__name__)

# |zeta| beyond which the algebraic expansion replaces the direct U evaluation;
# taken below the usual crossover of 50: at |zeta| = 20 the 2F0 tail in zeta^-3 is already at double precision
ASYMPTOTIC_ZETA = 20.0
ACCURACY_TARGET = 1e-8
ODE_STEP = 1e-3
PDE_STEP = 1e-4
# Kummer stencils stay clear of the z^(1/3) cusp at z = 0
KUMMER_EXCLUSION = 0.5
CLOSED_FORM_DECAY = 50.0


@dataclass(frozen=True)
class PhasePoint:
    """A point of the half space x >= 0 in position-velocity coordinates."""

    x: float
    v: float

    def __post_init__(self):
        if self.x < 0:
            raise DomainError(f"phase point must have x >= 0, got x={self.x}")

    @property
    def norm(self) -> float:
        """Homogeneous norm x + |v|^3."""
        return self.x + abs(self.v) ** 3


@dataclass(frozen=True)
class Profile:
    """
    A one-dimensional profile in the U-normalization.

    The forward kind samples Lambda_gamma(zeta); the adjoint kind samples
    Phi_beta(y) = U(-beta, 2/3, y).
    """

    gamma: float
    kind: Literal["forward", "adjoint"] = "forward"

    def __call__(self, s):
        if self.kind == "forward":
            return lambda_profile(self.gamma, s)
        _check_gamma(self.gamma)
        return tricomi_u(-self.gamma, 2.0 / 3.0, s, rtol=ACCURACY_TARGET).value


def _check_gamma(gamma: float) -> None:
    if not GAMMA_LOW < gamma < GAMMA_HIGH:
        raise DomainError(f"exponent {gamma} outside (-5/6, 1/6)")


def _as_array(values) -> tuple[np.ndarray, bool]:
    scalar = np.ndim(values) == 0
    return np.atleast_1d(np.asarray(values, dtype=float)), scalar


def _output(values: np.ndarray, scalar: bool):
    return float(values[0]) if scalar else values


# ---------------------
# 1. One-Dimensional Profiles
# ---------------------

def lambda_profile(gamma: float, zeta):
    """
    Evaluate Lambda_gamma(zeta) = U(-gamma, 2/3, -zeta^3).

    For |zeta| <= 20 the Tricomi function is evaluated directly with relative
    accuracy 1e-8; beyond, the algebraic expansion
    K^[zeta>0] |zeta|^(3 gamma) 2F0(-gamma, 1/3 - gamma; +-|zeta|^-3) is used.

    Args:
        gamma (float): Exponent in (-5/6, 1/6).
        zeta (float | np.ndarray): Similarity variable(s).

    Returns:
        float | np.ndarray: Positive profile value(s).

    Raises:
        DomainError: If gamma is outside the open interval.
    """
    _check_gamma(gamma)
    z, scalar = _as_array(zeta)
    out = np.empty_like(z)
    near = np.abs(z) <= ASYMPTOTIC_ZETA
    if near.any():
        out[near] = np.atleast_1d(tricomi_u(-gamma, 2.0 / 3.0, -z[near] ** 3, rtol=ACCURACY_TARGET).value)
    pos = z > ASYMPTOTIC_ZETA
    if pos.any():
        w = z[pos]
        series = np.atleast_1d(hyp2f0(-gamma, 1.0 / 3.0 - gamma, w ** -3.0).value)
        out[pos] = k_gamma(gamma) * w ** (3.0 * gamma) * series
    neg = z < -ASYMPTOTIC_ZETA
    if neg.any():
        w = -z[neg]
        series = np.atleast_1d(hyp2f0(-gamma, 1.0 / 3.0 - gamma, -(w ** -3.0)).value)
        out[neg] = w ** (3.0 * gamma) * series
    return _output(out, scalar)


def lambda_derivative(gamma: float, zeta):
    """
    Exact derivative Lambda'_gamma(zeta) = -3 gamma zeta^2 U(1 - gamma, 5/3, -zeta^3).

    Args:
        gamma (float): Exponent in (-5/6, 1/6).
        zeta (float | np.ndarray): Similarity variable(s).

    Returns:
        float | np.ndarray: Derivative value(s); at zeta = 0 the limit
            -3 gamma Gamma(2/3)/Gamma(1 - gamma).
    """
    _check_gamma(gamma)
    z, scalar = _as_array(zeta)
    out = np.empty_like(z)

    origin = z == 0.0
    out[origin] = -3.0 * gamma * special.gamma(2.0 / 3.0) * special.rgamma(1.0 - gamma)
    near = (np.abs(z) <= ASYMPTOTIC_ZETA) & ~origin
    if near.any():
        zn = z[near]
        u = np.atleast_1d(tricomi_u(1.0 - gamma, 5.0 / 3.0, -zn ** 3).value)
        out[near] = -3.0 * gamma * zn ** 2 * u
    pos = z > ASYMPTOTIC_ZETA
    if pos.any():
        w = z[pos]
        series = np.atleast_1d(hyp2f0(1.0 - gamma, 1.0 / 3.0 - gamma, w ** -3.0).value)
        out[pos] = 3.0 * gamma * k_gamma(gamma) * w ** (3.0 * gamma - 1.0) * series
    neg = z < -ASYMPTOTIC_ZETA
    if neg.any():
        w = -z[neg]
        series = np.atleast_1d(hyp2f0(1.0 - gamma, 1.0 / 3.0 - gamma, -(w ** -3.0)).value)
        out[neg] = -3.0 * gamma * w ** (3.0 * gamma - 1.0) * series
    return _output(out, scalar)


def lambda_m23_closed(zeta: float) -> float:
    """
    Closed form of Lambda_(-2/3) as the integral 3 int_(-inf)^zeta exp(s^3 - zeta^3) ds.

    With s = zeta - t the integrand is exp(-t (t^2 - 3 zeta t + 3 zeta^2)),
    whose exponent is nonnegative for every zeta; the integral is truncated
    where the exponent exceeds 50.

    Args:
        zeta (float): Similarity variable, |zeta| <= 50.

    Returns:
        float: Lambda_(-2/3)(zeta) with absolute error below 1e-10.
    """
    zeta = float(zeta)
    if abs(zeta) > 50.0:
        raise DomainError(f"|zeta| must not exceed 50, got {zeta}")
    cube_root = CLOSED_FORM_DECAY ** (1.0 / 3.0)
    z2 = zeta * zeta
    if zeta > 0:
        # t^2 - 3 zeta t + 3 zeta^2 >= 3/4 zeta^2
        upper = min(CLOSED_FORM_DECAY / (0.75 * z2), 3.0 * zeta + cube_root)
    elif zeta < 0:
        upper = min(CLOSED_FORM_DECAY / (3.0 * z2), cube_root)
    else:
        upper = cube_root

    def integrand(t: float) -> float:
        return math.exp(-t * (t * t - 3.0 * zeta * t + 3.0 * z2))

    value, _ = integrate.quad(integrand, 0.0, upper, epsabs=1e-13, epsrel=1e-13, limit=200)
    return 3.0 * value


# ---------------------
# 2. Forward Solutions G_gamma
# ---------------------

def g_field(gamma: float, x, v):
    """
    Vectorized G_gamma(x, v) = x^gamma Lambda_gamma(v/(9x)^(1/3)) on broadcast arrays.

    Args:
        gamma (float): Exponent in (-5/6, 1/6).
        x (float | np.ndarray): Positions, all strictly positive.
        v (float | np.ndarray): Velocities.

    Returns:
        float | np.ndarray: G_gamma with the broadcast shape of x and v.
    """
    x_arr, v_arr = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(v, dtype=float))
    if np.any(x_arr <= 0):
        raise DomainError("G_gamma needs x > 0; use boundary_trace for the wall limit")
    zeta = v_arr / np.cbrt(9.0 * x_arr)
    values = x_arr ** gamma * np.reshape(lambda_profile(gamma, zeta.ravel()), zeta.shape)
    return float(values) if values.ndim == 0 else values


def g_gamma(gamma: float, p: PhasePoint) -> float:
    """
    Evaluate the homogeneous steady solution G_gamma at one phase point.

    G_gamma(lambda^3 x, lambda v) = lambda^(3 gamma) G_gamma(x, v).

    Args:
        gamma (float): Exponent in (-5/6, 1/6).
        p (PhasePoint): Point with x > 0.

    Returns:
        float: G_gamma(x, v) > 0.
    """
    if p.x <= 0:
        raise DomainError("G_gamma needs x > 0; use boundary_trace for the wall limit")
    zeta = p.v / (9.0 * p.x) ** (1.0 / 3.0)
    return p.x ** gamma * lambda_profile(gamma, zeta)


def g_velocity_derivative(gamma: float, x, v):
    """Velocity derivative d_v G_gamma = x^gamma (9x)^(-1/3) Lambda'_gamma(zeta)."""
    x_arr, v_arr = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(v, dtype=float))
    if np.any(x_arr <= 0):
        raise DomainError("d_v G_gamma needs x > 0")
    scale = np.cbrt(9.0 * x_arr)
    zeta = v_arr / scale
    values = x_arr ** gamma / scale * np.reshape(lambda_derivative(gamma, zeta.ravel()), zeta.shape)
    return float(values) if values.ndim == 0 else values


def boundary_trace(gamma: float, v: float) -> float:
    """
    Wall trace G_gamma(0+, v) from the closed asymptotic constants.

    Args:
        gamma (float): Exponent in (-5/6, 1/6).
        v (float): Nonzero velocity.

    Returns:
        float: K_gamma v^(3 gamma)/9^gamma for v > 0, |v|^(3 gamma)/9^gamma for v < 0.

    Raises:
        DomainError: If v = 0 (the singular point).
    """
    if v == 0:
        raise DomainError("the wall trace is singular at v = 0")
    base = abs(v) ** (3.0 * gamma) / 9.0 ** gamma
    return k_gamma(gamma) * base if v > 0 else base


def steady_bc_residual(gamma: float, r: float, v: float) -> float:
    """
    Residual G(0, v) - r^2 G(0, -r v) of the inelastic wall condition at an incoming v < 0.

    Args:
        gamma (float): Exponent in (-5/6, 1/6).
        r (float): Restitution coefficient.
        v (float): Incoming velocity, v < 0.

    Returns:
        float: The residual; zero exactly when r^(2 + 3 gamma) K_gamma = 1.
    """
    if not v < 0:
        raise DomainError(f"the wall condition is posed at incoming velocities v < 0, got {v}")
    return boundary_trace(gamma, v) - r * r * boundary_trace(gamma, -r * v)


# ---------------------
# 3. Adjoint Solutions F_beta
# ---------------------

def adjoint_profile(beta: float, p: PhasePoint) -> float:
    """
    Evaluate F_beta(x, v) = x^beta U(-beta, 2/3, v^3/(9x)) for an explicit exponent.

    Args:
        beta (float): Exponent in (-5/6, 1/6).
        p (PhasePoint): Point with x > 0.

    Returns:
        float: F_beta(x, v) > 0; identically 1 when beta = 0.
    """
    if p.x <= 0:
        raise DomainError("F_beta needs x > 0; use adjoint_boundary_trace for the wall limit")
    return g_gamma(beta, PhasePoint(p.x, -p.v))


def f_beta(r: float, p: PhasePoint) -> float:
    """
    Evaluate the adjoint solution F_beta with beta = beta_of_r(r).

    F_beta solves v d_x F + d_vv F = 0 and, in the wall trace, the adjoint
    condition F(0, r v) = F(0, -v) for v > 0.

    Args:
        r (float): Restitution coefficient in (0, r_c).
        p (PhasePoint): Point with x > 0.

    Returns:
        float: F_beta(x, v).
    """
    return adjoint_profile(beta_of_r(r), p)


def adjoint_boundary_trace(beta: float, v: float) -> float:
    """Wall trace F_beta(0+, v): v^(3 beta)/9^beta for v > 0, K_beta |v|^(3 beta)/9^beta for v < 0."""
    return boundary_trace(beta, -v)


# ---------------------
# 4. Residual Verifiers
# ---------------------

def _first(f, s: float, h: float) -> float:
    return (-f(s + 2 * h) + 8 * f(s + h) - 8 * f(s - h) + f(s - 2 * h)) / (12 * h)


def _second(f, s: float, h: float) -> float:
    return (-f(s + 2 * h) + 16 * f(s + h) - 30 * f(s) + 16 * f(s - h) - f(s - 2 * h)) / (12 * h * h)


def lambda_ode_residual(gamma: float, zeta: float) -> float:
    """
    Finite-difference residual of Lambda'' + 3 zeta^2 Lambda' - 9 gamma zeta Lambda = 0.

    Five-point stencils with step 1e-3 max(1, |zeta|).

    Args:
        gamma (float): Exponent in (-5/6, 1/6).
        zeta (float): Evaluation point.

    Returns:
        float: The residual.
    """
    h = ODE_STEP * max(1.0, abs(zeta))

    def lam(s: float) -> float:
        return lambda_profile(gamma, s)

    return _second(lam, zeta, h) + 3.0 * zeta ** 2 * _first(lam, zeta, h) - 9.0 * gamma * zeta * lam(zeta)


def kummer_residual(gamma: float, z: float) -> float:
    """
    Residual of Kummer's equation z Phi'' + (2/3 - z) Phi' + gamma Phi = 0 for Phi(z) = U(-gamma, 2/3, z).

    Args:
        gamma (float): Exponent in (-5/6, 1/6).
        z (float): Evaluation point with |z| >= 0.5.

    Returns:
        float: The residual.
    """
    if abs(z) < KUMMER_EXCLUSION:
        raise DomainError(f"Kummer residual is not sampled for |z| < {KUMMER_EXCLUSION}")
    _check_gamma(gamma)
    h = ODE_STEP * max(1.0, abs(z))

    def phi(s: float) -> float:
        return tricomi_u(-gamma, 2.0 / 3.0, s).value

    return z * _second(phi, z, h) + (2.0 / 3.0 - z) * _first(phi, z, h) + gamma * phi(z)


def steady_residual(gamma: float, x: float, v: float, h: float = PDE_STEP) -> float:
    """Residual v d_x G - d_vv G of the steady forward equation at (x, v)."""
    dx = _first(lambda s: g_gamma(gamma, PhasePoint(s, v)), x, h)
    dvv = _second(lambda s: g_gamma(gamma, PhasePoint(x, s)), v, h)
    return v * dx - dvv


def adjoint_steady_residual(beta: float, x: float, v: float, h: float = PDE_STEP) -> float:
    """Residual v d_x F + d_vv F of the steady adjoint equation at (x, v)."""
    dx = _first(lambda s: adjoint_profile(beta, PhasePoint(s, v)), x, h)
    dvv = _second(lambda s: adjoint_profile(beta, PhasePoint(x, s)), v, h)
    return v * dx + dvv


# ---------------------
# 5. Mass Near the Origin
# ---------------------

def origin_mass(gamma: float, radius: float = 1.0) -> float:
    """
    Mass of G_gamma on the homogeneous ball {x + |v|^3 <= R^3}.

    In the coordinates x = rho^3 theta, v = +-rho (1 - theta)^(1/3) the
    Jacobian is rho^3 (1 - theta)^(-2/3), and homogeneity factors the
    integral into R^(3 gamma + 4)/(3 gamma + 4) times an angular integral.

    Args:
        gamma (float): Exponent in (-5/6, 1/6).
        radius (float): Ball radius R > 0.

    Returns:
        float: The mass, finite for every admissible gamma.
    """
    _check_gamma(gamma)
    if radius <= 0:
        raise DomainError(f"radius must be positive, got {radius}")

    def angular(theta: float, sign: float) -> float:
        if theta <= 0.0:
            return boundary_trace(gamma, sign)
        return g_gamma(gamma, PhasePoint(theta, sign * (1.0 - theta) ** (1.0 / 3.0)))

    total = 0.0
    for sign in (1.0, -1.0):
        # weight (1 - theta)^(-2/3) is integrated exactly by QAWS
        value, err = integrate.quad(
            angular, 0.0, 1.0, args=(sign,), weight="alg", wvar=(0.0, -2.0 / 3.0), epsabs=1e-12, epsrel=1e-10
        )
        logger.debug("origin_mass angular half (sign %+g): %.12g +- %.1g", sign, value, err)
        total += value
    power = 3.0 * gamma + 4.0
    return radius ** power / power * total


def box_mass(gamma: float, levels: int = 30, nodes: int = 16) -> float:
    """
    Mass of G_gamma on the box 0 < x < 1, |v| < 1 by tensor Gauss-Legendre panels.

    Panels halve toward x = 0 and v = 0 so the corner singularity is resolved.

    Args:
        gamma (float): Exponent in (-5/6, 1/6).
        levels (int): Number of dyadic levels per axis.
        nodes (int): Gauss-Legendre nodes per panel.

    Returns:
        float: The box mass.
    """
    _check_gamma(gamma)
    xs, wx = dyadic_gauss_legendre(levels, nodes)
    us, wu = dyadic_gauss_legendre(levels, nodes)
    vs = np.concatenate([-us, us])
    wv = np.concatenate([wu, wu])
    grid = g_field(gamma, xs[:, None], vs[None, :])
    mass = float(wx @ grid @ wv)
    logger.debug("box_mass(gamma=%g, levels=%d, nodes=%d) = %.10g", gamma, levels, nodes, mass)
    return mass


# ---------------------
# 6. Sampling
# ---------------------

def sample_profile(gamma: float, zetas) -> pd.DataFrame:
    """
    Tabulate Lambda_gamma on a grid of zeta values.

    Args:
        gamma (float): Exponent in (-5/6, 1/6).
        zetas (array-like): Sample points.

    Returns:
        pd.DataFrame: Columns zeta and lambda.
    """
    zetas = np.asarray(zetas, dtype=float)
    return pd.DataFrame({"zeta": zetas, "lambda": np.atleast_1d(lambda_profile(gamma, zetas))})


def sample_g(gamma: float, xs, vs) -> pd.DataFrame:
    """
    Tabulate G_gamma on the tensor grid xs x vs.

    Args:
        gamma (float): Exponent in (-5/6, 1/6).
        xs (array-like): Positive positions.
        vs (array-like): Velocities.

    Returns:
        pd.DataFrame: Long-format columns x, v and g.
    """
    xx, vv = np.meshgrid(np.asarray(xs, dtype=float), np.asarray(vs, dtype=float), indexing="ij")
    values = np.atleast_1d(g_field(gamma, xx, vv))
    return pd.DataFrame({"x": xx.ravel(), "v": vv.ravel(), "g": values.ravel()})
