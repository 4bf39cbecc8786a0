"""
Check Registry Module

This module maps every acceptance check to the modules it exercises, a short
description, and the gates its measured metrics must pass. The ``verify-all``
command and the controller iterate this registry; nothing here runs a check.

A gate is a (metric, comparison, threshold) triple, with comparison one of
"<", "<=", ">", ">=".
"""

import operator

COMPARISONS = {"<": operator.lt, "<=": operator.le, ">": operator.gt, ">=": operator.ge}

# Mapping of acceptance checks to their modules, gates and cost class
ACCEPTANCE_CHECKS = {
    "exponent_fidelity": {
        "modules": {"exponents"},
        "description": "alpha(1) = 0, alpha near r_c close to -2/3, wall equation residual on 200 r values",
        "gates": [
            ("alpha_elastic_error", "<", 1e-12),
            ("near_critical_gap", "<", 5e-3),
            ("max_residual", "<", 1e-10),
        ],
        "slow": False,
    },
    "profile_identity": {
        "modules": {"specfun", "profiles"},
        "description": "Lambda_(-2/3) against its integral form, and the profile ODE residual",
        "gates": [
            ("max_closed_gap", "<", 1e-6),
            ("max_ode_residual", "<", 1e-5),
        ],
        "slow": False,
    },
    "flux_constant": {
        "modules": {"profiles", "fluxes", "exponents"},
        "description": "flux of G_(-2/3) equals 9^(2/3)(log r + pi/sqrt(3)) on every box; G_alpha carries none",
        "gates": [
            ("max_flux_gap", "<", 1e-3),
            ("max_box_deviation", "<", 1e-3),
            ("max_alpha_flux", "<", 1e-6),
        ],
        "slow": False,
    },
    "moment_limit": {
        "modules": {"profiles", "fluxes"},
        "description": "first zeta moment of Lambda_(-2/3) tends to pi/sqrt(3)",
        "gates": [("moment_gap", "<", 1e-2)],
        "slow": False,
    },
    "c_star_cross_check": {
        "modules": {"exponents", "fluxes"},
        "description": "closed form of C_* against the pairing quadrature; C_* < 0",
        "gates": [
            ("max_c_star_gap", "<", 1e-3),
            ("max_c_star", "<", 0.0),
        ],
        "slow": False,
    },
    "monte_carlo_dichotomy": {
        "modules": {"particle_mc"},
        "description": "E[log H] = pi/sqrt(3), threshold estimate, collapse fractions at r = 0.05 and 0.5",
        "gates": [
            ("log_mean_gap", "<", 0.05),
            ("r_c_hat", ">=", 0.143),
            ("r_c_hat", "<=", 0.183),
            ("collapse_low_r", ">", 0.95),
            ("collapse_high_r", "<", 0.05),
        ],
        "slow": True,
    },
    "toy_limits": {
        "modules": {"lattice_toy"},
        "description": "lattice walks against the Dirichlet, Neumann and Robin heat solutions",
        "gates": [
            ("dirichlet_gap", "<", 0.02),
            ("neumann_gap", "<", 0.02),
            ("partial_mass_gap", "<", 0.05),
            ("refinement_ratio", "<", 1.0),
        ],
        "slow": False,
    },
    "solver_mass_law": {
        "modules": {"kfp_solver", "profiles", "exponents"},
        "description": "Kolmogorov kernel accuracy, mass ledger, flux law and the supercritical amplitude",
        "gates": [
            ("kernel_l1", "<", 0.03),
            ("ledger_gap", "<", 1e-10),
            ("flux_law_gap", "<", 0.1),
            ("supercritical_noise_ratio", "<", 3.0),
        ],
        "slow": True,
    },
}


def get_check(name: str) -> dict:
    """
    Get the registry entry of one acceptance check.

    Args:
        name: The name of the check

    Returns:
        The entry with modules, description, gates and slow flag

    Raises:
        KeyError: If the check is unknown.
    """
    if name not in ACCEPTANCE_CHECKS:
        raise KeyError(f"unknown acceptance check '{name}'; known: {sorted(ACCEPTANCE_CHECKS)}")
    return ACCEPTANCE_CHECKS[name]


def get_all_modules() -> set[str]:
    """Every module exercised by at least one acceptance check."""
    modules = set()
    for entry in ACCEPTANCE_CHECKS.values():
        modules.update(entry["modules"])
    return modules


def get_checks_for_modules(modules: list[str]) -> list[str]:
    """
    Get the checks that exercise any of the given modules.

    Args:
        modules: Module names (e.g. ['fluxes', 'kfp_solver'])

    Returns:
        Check names in registry order
    """
    wanted = set(modules)
    return [name for name, entry in ACCEPTANCE_CHECKS.items() if entry["modules"] & wanted]


def evaluate_gates(name: str, measured: dict) -> list[dict]:
    """
    Compare measured metrics with the gates of a check.

    A metric that is missing or NaN fails its gate.

    Args:
        name: The name of the check
        measured: Metric values keyed by metric name

    Returns:
        One row per gate with check, metric, value, comparison, threshold and passed
    """
    rows = []
    for metric, comparison, threshold in get_check(name)["gates"]:
        value = measured.get(metric)
        passed = value is not None and value == value and COMPARISONS[comparison](value, threshold)
        rows.append(
            {
                "check": name,
                "metric": metric,
                "value": value,
                "comparison": comparison,
                "threshold": threshold,
                "passed": bool(passed),
            }
        )
    return rows


class AcceptanceRegistry:
    """
    Registry class for the acceptance checks.
    Provides lookups by check and by module, and gate evaluation.
    """

    @classmethod
    def get_modules_for_check(cls, name: str) -> set[str]:
        """Modules exercised by a check."""
        return set(get_check(name)["modules"])

    @classmethod
    def get_all_checks(cls, include_slow: bool = True) -> list[str]:
        """
        Names of the registered checks.

        Args:
            include_slow: Whether to list the long-running checks too

        Returns:
            Check names in registry order
        """
        return [name for name, entry in ACCEPTANCE_CHECKS.items() if include_slow or not entry["slow"]]

    @classmethod
    def get_checks_for_modules(cls, modules: list[str]) -> list[str]:
        return get_checks_for_modules(modules)

    @classmethod
    def evaluate(cls, name: str, measured: dict) -> list[dict]:
        return evaluate_gates(name, measured)


acceptance_registry = AcceptanceRegistry()
