import math

import pytest

from inelastic_kfp.exponents import critical_r
from inelastic_kfp.experiments_controller import Experiments
from inelastic_kfp.utils.config import ScanConfig, parse_solver_config


@pytest.fixture
def experiments():
    return Experiments(seed=0, rounding=None)


def test_collect_exponents(experiments):
    """Test the exponent table on both sides of r_c."""
    table = experiments.collect_exponents([0.1, 0.5, 1.0])
    assert list(table.columns) == ["r", "alpha", "beta", "k_alpha", "kappa", "c_star"]
    assert table["alpha"].iloc[2] == pytest.approx(0.0, abs=1e-12)
    assert table["c_star"].iloc[0] < 0
    assert math.isnan(table["c_star"].iloc[1])
    assert "error" not in table.attrs


def test_collect_exponents_at_critical_r(experiments):
    """Test that the degenerate root at r_c gives an empty, annotated result."""
    table = experiments.collect_exponents([critical_r()])
    assert table.empty
    assert "domain error" in table.attrs["error"]
    assert table.attrs["error"].startswith("collect_exponents")


def test_collect_profile(experiments):
    """Test the profile samples, the empty table and the evaluation window."""
    table = experiments.collect_profile(gamma=-2.0 / 3.0, zeta_range=(-1.0, 1.0), samples=3)
    assert list(table.columns) == ["zeta", "lambda"]
    assert table["lambda"].iloc[1] == pytest.approx(math.gamma(1.0 / 3.0), rel=1e-10)
    assert table.attrs["gamma"] == pytest.approx(-2.0 / 3.0)

    empty = experiments.collect_profile(gamma=-2.0 / 3.0, samples=0)
    assert empty.empty
    assert list(empty.columns) == ["zeta", "lambda"]
    assert "error" not in empty.attrs

    field = experiments.collect_profile(r=0.1, zeta_range=(-1.0, 1.0), samples=4, field=True)
    assert list(field.columns) == ["x", "v", "g"]
    assert len(field) == 16

    outside = experiments.collect_profile(gamma=-2.0 / 3.0, zeta_range=(-2e3, 0.0))
    assert outside.empty
    assert "domain error" in outside.attrs["error"]

    missing = experiments.collect_profile()
    assert "either gamma or r" in missing.attrs["error"]


def test_rounding():
    """Test that results are rounded to the controller's precision."""
    table = Experiments(rounding=3).collect_exponents([0.1])
    assert table["alpha"].iloc[0] == round(table["alpha"].iloc[0], 3)


def test_collect_cstar(experiments):
    """Test the three forms of C_* agree."""
    table = experiments.collect_cstar([0.1])
    assert table["relative_gap"].iloc[0] < 1e-3
    assert table["c_star_alternative"].iloc[0] == pytest.approx(table["c_star_closed"].iloc[0], rel=1e-10)

    supercritical = experiments.collect_cstar([0.5])
    assert supercritical.empty
    assert "domain error" in supercritical.attrs["error"]


def test_collect_toy(experiments):
    """Test the lattice comparison and the rejected mode."""
    table = experiments.collect_toy(mode="trapping", h=0.02)
    assert list(table.columns) == ["x", "U_h", "U_ref"]
    assert table.attrs["L1_gap"] < 0.05

    bad = experiments.collect_toy(mode="sticky")
    assert bad.empty
    assert "unknown lattice mode" in bad.attrs["error"]


def test_collect_mc(experiments):
    """Test a small collapse scan and its threshold estimate."""
    table = experiments.collect_mc(ScanConfig(r_grid=[0.05, 0.5], paths=50, ratio_samples=2000))
    assert len(table) == 2
    assert 0.02 < table.attrs["r_c_hat"] < 0.9


def test_collect_solve(experiments):
    """Test that the solver diagnostics come back with the run's mode and r."""
    config = parse_solver_config(
        {
            "r": 0.5, "mode": "supercritical", "X_max": 2.0, "V_max": 2.0, "n_x": 32, "n_v": 32,
            "dt": 2e-3, "T": 0.02, "rho_cut": 0.0, "output_every": 5,
        }
    )
    table = experiments.collect_solve(config)
    assert len(table) == 3
    assert table.attrs["mode"] == "supercritical"
    assert table.attrs["r"] == 0.5


def test_verify_quick_checks(experiments):
    """Test that the quick checks run and pass their gates."""
    table = experiments.verify(["moment_limit", "exponent_fidelity"])
    assert list(table.columns) == ["check", "metric", "value", "comparison", "threshold", "passed", "error"]
    assert len(table) == 4
    assert table["passed"].all()
    assert (table["error"] == "").all()


def test_verify_unknown_check(experiments):
    """Test that an unknown check name is rejected without running anything."""
    table = experiments.verify(["no_such_check"])
    assert table.empty
    assert "unknown acceptance checks" in table.attrs["error"]


def test_collect_hitting_speeds(experiments):
    """Test the first-return speed histogram against the McKean density."""
    table = experiments.collect_hitting_speeds(paths=500, bins=20)
    assert list(table.columns) == ["h", "empirical", "mckean"]
    assert len(table) == 20
    assert (table["empirical"] >= 0).all()
    assert table["mckean"].max() < 1.0
    assert math.isfinite(table.attrs["log_mean"])
