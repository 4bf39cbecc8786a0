"""
Special Functions Module

This module evaluates the special functions needed by the profile, flux and
exponent computations on the real parameter ranges they use. Every
confluent hypergeometric evaluation carries an absolute error estimate.

1. Gamma Family (2 functions)
   - gamma_fn
   - beta_fn

2. Confluent Hypergeometric Functions (3 functions)
   - kummer_m
   - tricomi_u
   - hyp2f0

Total Functions: 5

Note: kummer_m and tricomi_u accept a scalar or an array of arguments z (the
parameters a, b stay scalar) and return a SpecFunResult whose fields have the
same shape as z. For z < 0 the Tricomi function is defined by the real
connection formula with the real cube-root branch of z^(1-b).
"""

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from inelastic_kfp.utils.helpers import AccuracyLossError, DomainError

logger = logging.getLogger(__name__)

EPS = np.finfo(float).eps

# |z| above which asymptotic expansions replace the Taylor series
SERIES_LIMIT = 40.0
# e^z overflows beyond this
OVERFLOW_LIMIT = 700.0
MAX_ARGUMENT = 1.0e4
# U switches from the connection formula to the Laguerre rule above this z
CONNECTION_LIMIT = 4.0

LAGUERRE_NODES = 128
LAGUERRE_CHECK_NODES = 96


@dataclass(frozen=True)
class SpecFunResult:
    """Value of a special function together with an absolute error estimate."""

    value: float | np.ndarray
    abs_err_est: float | np.ndarray


def _is_nonpositive_integer(x: float) -> bool:
    return x <= 0 and float(x).is_integer()


def _as_output(values: np.ndarray, errors: np.ndarray, scalar: bool) -> SpecFunResult:
    if scalar:
        return SpecFunResult(float(values[0]), float(errors[0]))
    return SpecFunResult(values, errors)


def _check_accuracy(name: str, values: np.ndarray, errors: np.ndarray, rtol: float | None) -> None:
    if not np.all(np.isfinite(values)):
        bad = values[~np.isfinite(values)][0]
        raise AccuracyLossError(f"{name} produced a non-finite value", float(bad), float("inf"))
    if rtol is None:
        return
    limit = rtol * np.maximum(np.abs(values), np.finfo(float).tiny)
    failed = errors > limit
    if np.any(failed):
        idx = int(np.argmax(failed))
        raise AccuracyLossError(
            f"{name}: error estimate {errors[idx]:.3g} exceeds rtol={rtol:g}",
            float(values[idx]),
            float(errors[idx]),
        )


# ---------------------
# 1. Gamma Family
# ---------------------

def gamma_fn(x: float) -> float:
    """
    Evaluate the Gamma function on the real line.

    Args:
        x (float): Real argument, not a nonpositive integer.

    Returns:
        float: Gamma(x).

    Raises:
        DomainError: If x is a pole (0, -1, -2, ...).
    """
    if _is_nonpositive_integer(x):
        raise DomainError(f"Gamma has a pole at x={x}")
    return float(special.gamma(x))


def beta_fn(a: float, b: float) -> float:
    """
    Evaluate the Beta function B(a, b) = Gamma(a)Gamma(b)/Gamma(a+b).

    Args:
        a (float): First argument, not a nonpositive integer.
        b (float): Second argument, not a nonpositive integer.

    Returns:
        float: B(a, b).
    """
    if _is_nonpositive_integer(a) or _is_nonpositive_integer(b):
        raise DomainError(f"Beta has a pole at ({a}, {b})")
    return float(special.beta(a, b))


# ---------------------
# 2. Confluent Hypergeometric Functions
# ---------------------

def _taylor_m(a: float, b: float, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Power series of M(a, b, y); terminates exactly when a is a nonpositive integer."""
    term = np.ones_like(y)
    total = np.ones_like(y)
    abs_sum = np.ones_like(y)
    ay = np.abs(y)
    for n in range(2000):
        term = term * ((a + n) / (b + n)) * y / (n + 1)
        total = total + term
        abs_sum = abs_sum + np.abs(term)
        if not term.any():
            break
        if n + 1 > ay.max() and np.all(np.abs(term) <= 1e-17 * np.abs(total)):
            break
    err = np.abs(term) + 4.0 * EPS * abs_sum
    return total, err


def _asymptotic_sum(p: float, q: float, w: np.ndarray, sign: float) -> tuple[np.ndarray, np.ndarray]:
    """
    Sum of (p)_s (q)_s / s! (sign/w)^s, truncated before the terms start growing.

    Returns the partial sum and the magnitude of the first omitted term.
    """
    total = np.ones_like(w)
    term = np.ones_like(w)
    err = np.zeros_like(w)
    active = np.ones(w.shape, dtype=bool)
    for s in range(400):
        nxt = term * (p + s) * (q + s) / (s + 1) * sign / w
        growing = active & (np.abs(nxt) >= np.abs(term)) & (term != 0)
        err[growing] = np.abs(nxt[growing])
        active &= ~growing
        total = np.where(active, total + nxt, total)
        term = np.where(active, nxt, term)
        converged = active & (np.abs(nxt) <= 1e-17 * np.abs(total))
        err[converged] = np.abs(nxt[converged])
        active &= ~converged
        if not active.any():
            break
    err[active] = np.abs(term[active])
    return total, err + 4.0 * EPS * np.abs(total)


def _kummer_m_array(a: float, b: float, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if np.any(z > OVERFLOW_LIMIT) and not _is_nonpositive_integer(a):
        raise DomainError(f"M({a}, {b}, z) overflows for z > {OVERFLOW_LIMIT}")

    # terminating cases: polynomial, or exponential times polynomial
    if _is_nonpositive_integer(a):
        return _taylor_m(a, b, z)
    if _is_nonpositive_integer(b - a):
        poly, err = _taylor_m(b - a, b, -z)
        scale = np.exp(z)
        return scale * poly, scale * err

    values = np.empty_like(z)
    errors = np.empty_like(z)

    mid_pos = (z >= 0) & (z <= SERIES_LIMIT)
    mid_neg = (z < 0) & (z >= -SERIES_LIMIT)
    big_pos = z > SERIES_LIMIT
    big_neg = z < -SERIES_LIMIT

    if mid_pos.any():
        values[mid_pos], errors[mid_pos] = _taylor_m(a, b, z[mid_pos])
    if mid_neg.any():
        # Kummer's transformation keeps every series term of one sign
        series, err = _taylor_m(b - a, b, -z[mid_neg])
        scale = np.exp(z[mid_neg])
        values[mid_neg] = scale * series
        errors[mid_neg] = scale * err
    if big_neg.any():
        w = -z[big_neg]
        pref = special.gamma(b) * special.rgamma(b - a) * w ** (-a)
        series, err = _asymptotic_sum(a, 1.0 + a - b, w, 1.0)
        values[big_neg] = pref * series
        errors[big_neg] = np.abs(pref) * err
    if big_pos.any():
        w = z[big_pos]
        pref = special.gamma(b) * special.rgamma(a) * np.exp(w) * w ** (a - b)
        series, err = _asymptotic_sum(b - a, 1.0 - a, w, 1.0)
        values[big_pos] = pref * series
        errors[big_pos] = np.abs(pref) * err
    return values, errors


def kummer_m(a: float, b: float, z, rtol: float | None = None) -> SpecFunResult:
    """
    Evaluate Kummer's confluent hypergeometric function M(a, b, z).

    Taylor series for |z| <= 40 (after Kummer's transformation when z < 0),
    the large-|z| asymptotic expansions beyond, and exact polynomial
    evaluation when a or b - a is a nonpositive integer.

    Args:
        a (float): First parameter.
        b (float): Second parameter, not a nonpositive integer.
        z (float | np.ndarray): Real argument(s), |z| <= 1e4.
        rtol (float, optional): Relative accuracy demanded of every value.

    Returns:
        SpecFunResult: Value(s) and absolute error estimate(s).

    Raises:
        DomainError: Parameter pole, |z| too large, or overflow of e^z.
        AccuracyLossError: When rtol is given and cannot be met.
    """
    if _is_nonpositive_integer(b):
        raise DomainError(f"M(a, b, z) is undefined for b={b}")
    scalar = np.ndim(z) == 0
    z_arr = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(np.abs(z_arr) > MAX_ARGUMENT):
        raise DomainError(f"|z| must not exceed {MAX_ARGUMENT:g}")

    values, errors = _kummer_m_array(float(a), float(b), z_arr)
    values = np.where(z_arr == 0.0, 1.0, values)
    errors = np.where(z_arr == 0.0, 0.0, errors)
    _check_accuracy("kummer_m", values, errors, rtol)
    return _as_output(values, errors, scalar)


@lru_cache(maxsize=64)
def _laguerre_rule(n: int, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = special.roots_genlaguerre(n, alpha)
    return nodes, weights


def _laguerre_u(a: float, b: float, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """U(a, b, z) for a > 0, z > 0 from z^-a/Gamma(a) * int e^-u u^(a-1) (1+u/z)^(b-a-1) du."""

    def rule(n: int) -> np.ndarray:
        nodes, weights = _laguerre_rule(n, round(a - 1.0, 14))
        kernel = (1.0 + nodes[None, :] / z[:, None]) ** (b - a - 1.0)
        return kernel @ weights

    fine = rule(LAGUERRE_NODES)
    coarse = rule(LAGUERRE_CHECK_NODES)
    pref = z ** (-a) * special.rgamma(a)
    values = pref * fine
    errors = np.abs(pref * (fine - coarse)) + 8.0 * EPS * np.abs(values)
    return values, errors


def _real_power(z: np.ndarray, thirds: int) -> np.ndarray:
    """z^(thirds/3) on the real branch built from the real cube root."""
    return np.cbrt(z) ** thirds


def _connection_u(a: float, b: float, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    thirds = int(round(3.0 * (1.0 - b)))
    m1, e1 = _kummer_m_array(a, b, z)
    m2, e2 = _kummer_m_array(1.0 + a - b, 2.0 - b, z)
    c1 = special.rgamma(1.0 + a - b) * special.rgamma(b)
    c2 = special.rgamma(a) * special.rgamma(2.0 - b)
    with np.errstate(divide="ignore", invalid="ignore"):
        power = _real_power(z, thirds)
    if thirds < 0 and c2 != 0.0 and np.any(z == 0.0):
        raise DomainError(f"U({a}, {b}, z) is singular at z = 0")
    second = np.where(z == 0.0, 0.0, power * m2) if thirds > 0 else power * m2
    second_err = np.where(z == 0.0, 0.0, np.abs(power) * e2) if thirds > 0 else np.abs(power) * e2
    pref = np.pi / np.sin(np.pi * b)
    values = pref * (c1 * m1 - c2 * second)
    errors = np.abs(pref) * (np.abs(c1) * e1 + np.abs(c2) * second_err)
    errors = errors + 4.0 * EPS * np.abs(pref) * (np.abs(c1 * m1) + np.abs(c2 * second))
    return values, errors


def _moderate_u(a: float, b: float, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """U on 4 < z <= 40 through the Laguerre rule, shifting a upward when needed."""
    if a > 0:
        return _laguerre_u(a, b, z)
    if 1.0 + a - b > 0:
        values, errors = _laguerre_u(1.0 + a - b, 2.0 - b, z)
        power = z ** (1.0 - b)
        return power * values, power * errors

    # DLMF 13.3.7, run downward from a + m > 0
    m = int(np.ceil(-a)) + 1
    top = a + m
    u_hi, e_hi = _laguerre_u(top + 1.0, b, z)
    u_mid, e_mid = _laguerre_u(top, b, z)
    err = np.maximum(e_hi / np.abs(u_hi), e_mid / np.abs(u_mid))
    c = top
    for _ in range(m):
        u_lo = -(b - 2.0 * c - z) * u_mid - c * (c - b + 1.0) * u_hi
        u_hi, u_mid = u_mid, u_lo
        c -= 1.0
    return u_mid, 4.0 * err * np.abs(u_mid)


def tricomi_u(a: float, b: float, z, rtol: float | None = None) -> SpecFunResult:
    """
    Evaluate Tricomi's confluent hypergeometric function U(a, b, z) on the real line.

    For z <= 4 (all negative z included) U is the connection formula
    pi/sin(pi b) [M(a,b,z)/(Gamma(1+a-b)Gamma(b)) - z^(1-b) M(1+a-b,2-b,z)/(Gamma(a)Gamma(2-b))]
    with the real cube-root branch of z^(1-b). For 4 < z <= 40 a generalized
    Gauss-Laguerre rule is applied to the integral representation, and for
    z > 40 the algebraic asymptotic series z^-a sum (a)_s(1+a-b)_s/s! (-z)^-s.

    Args:
        a (float): First parameter.
        b (float): Second parameter; 3b must be an integer and b not an integer.
        z (float | np.ndarray): Real argument(s), |z| <= 1e4.
        rtol (float, optional): Relative accuracy demanded of every value.

    Returns:
        SpecFunResult: Value(s) and absolute error estimate(s).
    """
    thirds = 3.0 * b
    if not float(thirds).is_integer() or float(b).is_integer():
        raise DomainError(f"U(a, b, z) on the real line needs b in (1/3)Z \\ Z, got b={b}")
    scalar = np.ndim(z) == 0
    z_arr = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(np.abs(z_arr) > MAX_ARGUMENT):
        raise DomainError(f"|z| must not exceed {MAX_ARGUMENT:g}")
    a = float(a)
    b = float(b)

    if a == 0.0:
        return _as_output(np.ones_like(z_arr), np.zeros_like(z_arr), scalar)
    if _is_nonpositive_integer(a):
        n = int(-a)
        poly, err = _taylor_m(a, b, z_arr)
        factor = (-1.0) ** n * special.poch(b, n)
        return _as_output(factor * poly, abs(factor) * err, scalar)

    values = np.empty_like(z_arr)
    errors = np.empty_like(z_arr)
    low = z_arr <= CONNECTION_LIMIT
    moderate = (z_arr > CONNECTION_LIMIT) & (z_arr <= SERIES_LIMIT)
    large = z_arr > SERIES_LIMIT

    if low.any():
        values[low], errors[low] = _connection_u(a, b, z_arr[low])
    if moderate.any():
        values[moderate], errors[moderate] = _moderate_u(a, b, z_arr[moderate])
    if large.any():
        w = z_arr[large]
        series, err = _asymptotic_sum(a, 1.0 + a - b, w, -1.0)
        pref = w ** (-a)
        values[large] = pref * series
        errors[large] = pref * err

    _check_accuracy("tricomi_u", values, errors, rtol)
    logger.debug("tricomi_u(%g, %g) evaluated at %d points", a, b, z_arr.size)
    return _as_output(values, errors, scalar)


def hyp2f0(p: float, q: float, x) -> SpecFunResult:
    """
    Asymptotic sum of 2F0(p, q; ; x) = sum_s (p)_s (q)_s / s! x^s, truncated at its smallest term.

    This is the series behind the large-argument forms of M and U; it is
    meaningful for small |x| and exact when p or q is a nonpositive integer.

    Args:
        p (float): First parameter.
        q (float): Second parameter.
        x (float | np.ndarray): Nonzero real argument(s), |x| small.

    Returns:
        SpecFunResult: Partial sum(s) and the magnitude of the first omitted term.
    """
    scalar = np.ndim(x) == 0
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x_arr == 0.0):
        values = np.ones_like(x_arr)
        errors = np.zeros_like(x_arr)
        nonzero = x_arr != 0.0
        if nonzero.any():
            inner = hyp2f0(p, q, x_arr[nonzero])
            values[nonzero] = inner.value
            errors[nonzero] = inner.abs_err_est
        return _as_output(values, errors, scalar)
    values = np.empty_like(x_arr)
    errors = np.empty_like(x_arr)
    for sign in (1.0, -1.0):
        mask = np.sign(x_arr) == sign
        if mask.any():
            values[mask], errors[mask] = _asymptotic_sum(p, q, 1.0 / np.abs(x_arr[mask]), sign)
    return _as_output(values, errors, scalar)
