"""
Utilities for the Inelastic KFP Toolkit

This package provides the error hierarchy, quadrature helpers, run
configuration models and the acceptance check registry.
"""

from .helpers import (
    AccuracyLossError,
    ConfigurationError,
    ContractViolation,
    ConvergenceError,
    DegenerateRootError,
    DomainError,
    KfpError,
    RefinementError,
    handle_errors,
)
from .check_registry import (
    ACCEPTANCE_CHECKS,
    AcceptanceRegistry,
    acceptance_registry,
    get_all_modules,
    get_check,
    get_checks_for_modules,
)

__all__ = [
    'AccuracyLossError',
    'ConfigurationError',
    'ContractViolation',
    'ConvergenceError',
    'DegenerateRootError',
    'DomainError',
    'KfpError',
    'RefinementError',
    'handle_errors',
    'ACCEPTANCE_CHECKS',
    'AcceptanceRegistry',
    'acceptance_registry',
    'get_all_modules',
    'get_check',
    'get_checks_for_modules',
]
