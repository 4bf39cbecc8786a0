import math

import pytest

from inelastic_kfp.utils.check_registry import (
    ACCEPTANCE_CHECKS,
    COMPARISONS,
    AcceptanceRegistry,
    get_all_modules,
    get_check,
    get_checks_for_modules,
)


def test_registry_entries():
    """Test that every check names its modules and has well-formed gates."""
    for name, entry in ACCEPTANCE_CHECKS.items():
        assert entry["modules"], name
        assert entry["gates"], name
        for metric, comparison, threshold in entry["gates"]:
            assert isinstance(metric, str)
            assert comparison in COMPARISONS
            assert isinstance(threshold, float)


def test_get_check():
    """Test the lookup of a known and an unknown check."""
    assert get_check("moment_limit")["gates"] == [("moment_gap", "<", 1e-2)]
    with pytest.raises(KeyError):
        get_check("no_such_check")


def test_module_lookups():
    """Test the mapping between checks and modules."""
    assert get_checks_for_modules(["kfp_solver"]) == ["solver_mass_law"]
    assert get_checks_for_modules(["lattice_toy", "particle_mc"]) == ["monte_carlo_dichotomy", "toy_limits"]
    assert get_checks_for_modules(["cli"]) == []
    assert {"specfun", "exponents", "profiles", "fluxes", "particle_mc", "lattice_toy", "kfp_solver"} == get_all_modules()
    assert AcceptanceRegistry.get_modules_for_check("profile_identity") == {"specfun", "profiles"}


def test_slow_checks_excluded():
    """Test that the quick listing leaves out the long checks."""
    quick = AcceptanceRegistry.get_all_checks(include_slow=False)
    assert "monte_carlo_dichotomy" not in quick
    assert "solver_mass_law" not in quick
    assert len(AcceptanceRegistry.get_all_checks()) == len(ACCEPTANCE_CHECKS)


def test_evaluate_gates():
    """Test passing, failing, missing and NaN metrics."""
    rows = AcceptanceRegistry.evaluate("c_star_cross_check", {"max_c_star_gap": 1e-4, "max_c_star": -0.3})
    assert [row["passed"] for row in rows] == [True, True]

    rows = AcceptanceRegistry.evaluate("c_star_cross_check", {"max_c_star_gap": 1e-2, "max_c_star": -0.3})
    assert [row["passed"] for row in rows] == [False, True]

    # a missing or NaN metric fails its gate
    rows = AcceptanceRegistry.evaluate("c_star_cross_check", {"max_c_star_gap": math.nan})
    assert [row["passed"] for row in rows] == [False, False]
    assert rows[1]["value"] is None

    # both bounds of a two-sided gate are checked
    rows = AcceptanceRegistry.evaluate("monte_carlo_dichotomy", {"r_c_hat": 0.2})
    bounds = [row["passed"] for row in rows if row["metric"] == "r_c_hat"]
    assert bounds == [True, False]
