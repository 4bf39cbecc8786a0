"""Helpers Module"""

import inspect
import logging
from functools import wraps

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid

logger = logging.getLogger(__name__)


class KfpError(Exception):
    """Base class for every error raised by the toolkit."""


class DomainError(KfpError, ValueError):
    """Input outside the admissible parameter range, or a pole of the function."""


class DegenerateRootError(DomainError):
    """The restitution coefficient is too close to r_c, where the exponent roots merge."""


class ContractViolation(KfpError, ValueError):
    """A caller broke a documented precondition (e.g. reflecting an outgoing velocity)."""


class AccuracyLossError(KfpError):
    """
    The requested accuracy could not be reached.

    Args:
        message (str): Human readable description.
        best_estimate (float): The best value that was computed.
        abs_err_est (float): Its absolute error estimate.
    """

    def __init__(self, message: str, best_estimate: float, abs_err_est: float):
        super().__init__(message)
        self.best_estimate = best_estimate
        self.abs_err_est = abs_err_est


class ConvergenceError(KfpError):
    """An iterative or limiting procedure did not settle; carries the last estimate."""

    def __init__(self, message: str, last_estimate: float | None = None):
        super().__init__(message)
        self.last_estimate = last_estimate


class RefinementError(ConvergenceError):
    """Quadrature refinement did not agree with the coarse evaluation."""


class ConfigurationError(KfpError, ValueError):
    """
    Invalid run configuration.

    Args:
        message (str): Summary of the problem.
        fields (list[str] | None): Field-level messages, one per offending field.
    """

    def __init__(self, message: str, fields: list[str] | None = None):
        self.fields = list(fields or [])
        if self.fields:
            message = message + ": " + "; ".join(self.fields)
        super().__init__(message)


def relative_gap(a: float, b: float) -> float:
    """Relative difference |a - b| / max(|a|, |b|), zero when both vanish."""
    scale = max(abs(a), abs(b))
    if scale == 0.0:
        return 0.0
    return abs(a - b) / scale


def l1_gap(x: np.ndarray, f: np.ndarray, g: np.ndarray) -> float:
    """Trapezoidal L1 distance between two sampled densities on the same nodes."""
    return float(trapezoid(np.abs(np.asarray(f) - np.asarray(g)), np.asarray(x)))


def empty_result(message: str) -> pd.DataFrame:
    """Empty DataFrame that carries an error message in ``attrs``."""
    result = pd.DataFrame()
    result.attrs["error"] = message
    return result


def handle_errors(func):
    """
    Decorator that turns toolkit errors raised inside a collector into an empty,
    annotated DataFrame, logging what went wrong.

    Args:
        func (function): The collector to be decorated.

    Returns:
        function: The decorated function. On failure it returns an empty
            pd.DataFrame with ``attrs["error"]`` set to the message.
    """

    @wraps(func)
    def wrapper(*args, **kwargs):
        function_name = func.__name__
        try:
            return func(*args, **kwargs)
        except ConfigurationError as e:
            logger.error("Invalid configuration for %s. %s", function_name, e)
            return empty_result(f"{function_name}: configuration error: {e}")
        except DomainError as e:
            logger.error("Input outside the admissible range in %s. %s", function_name, e)
            return empty_result(f"{function_name}: domain error: {e}")
        except AccuracyLossError as e:
            logger.error(
                "Accuracy target missed in %s (best estimate %.6g, error %.2g). %s",
                function_name, e.best_estimate, e.abs_err_est, e,
            )
            return empty_result(f"{function_name}: accuracy loss: {e}")
        except ConvergenceError as e:
            logger.error("No convergence in %s (last estimate %s). %s", function_name, e.last_estimate, e)
            return empty_result(f"{function_name}: convergence error: {e}")
        except KfpError as e:
            logger.error("An error occurred while running %s. %s", function_name, e)
            return empty_result(f"{function_name}: {e}")

    wrapper.__signature__ = inspect.signature(func)
    return wrapper


def dyadic_gauss_legendre(levels: int, nodes: int, length: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """
    Gauss-Legendre nodes and weights on [0, length] with panels halving toward 0.

    Args:
        levels (int): Number of dyadic panels; the last panel [0, length 2^-levels] closes the interval.
        nodes (int): Gauss-Legendre nodes per panel.
        length (float): Interval length.

    Returns:
        tuple[np.ndarray, np.ndarray]: Nodes and weights.
    """
    edges = np.append(0.0, length * 2.0 ** -np.arange(levels, -1, -1.0))
    return gauss_legendre_panels(edges, nodes)


def gauss_legendre_panels(edges, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights on consecutive panels given by ``edges``."""
    base, base_w = np.polynomial.legendre.leggauss(nodes)
    edges = np.asarray(edges, dtype=float)
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    points = lo[:, None] + half[:, None] * (base[None, :] + 1.0)
    weights = half[:, None] * base_w[None, :]
    return points.ravel(), weights.ravel()
