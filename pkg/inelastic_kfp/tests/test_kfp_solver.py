import numpy as np
import pytest

from inelastic_kfp.exponents import TRIVIAL_ROOT, alpha_of_r
from inelastic_kfp.kfp_solver import (
    Solver,
    SolverState,
    advance,
    apply_wall_bc,
    build_grid,
    fit_origin,
    initial_density,
    kolmogorov_kernel,
    run_diagnostic,
)
from inelastic_kfp.profiles import g_field
from inelastic_kfp.utils.config import GaussianBlob, ProfileCutoff, parse_solver_config
from inelastic_kfp.utils.helpers import ConfigurationError, DomainError


@pytest.fixture
def small_config():
    # explicit scheme within the CFL bound, no excision
    return parse_solver_config(
        {
            "r": 0.5, "mode": "supercritical", "X_max": 2.0, "V_max": 2.0, "n_x": 32, "n_v": 32,
            "dt": 2e-3, "T": 0.1, "rho_cut": 0.0, "output_every": 10,
        }
    )


@pytest.fixture
def trapping_config():
    # implicit scheme on graded grids with an excised corner
    return parse_solver_config(
        {
            "r": 0.1, "mode": "trapping", "X_max": 2.0, "V_max": 1.0, "n_x": 48, "n_v": 48,
            "x_stretch": 3.0, "v_first": 0.01, "dt": 1e-3, "T": 0.02, "rho_cut": 0.01,
            "rho_fit": 0.04, "scheme": "implicit", "output_every": 5,
        }
    )


@pytest.fixture
def corner_grid():
    return build_grid(0.1, 1.0, 1.0, 64, 64, x_stretch=4.0, v_first=0.005)


def grid_arrays(grid):
    return (
        np.broadcast_to(grid.x_nodes[:, None], grid.shape),
        np.broadcast_to(grid.v_nodes[None, :], grid.shape),
    )


def test_grid_pairing():
    """Test that every positive velocity cell is r times its negative partner."""
    grid = build_grid(0.5, 2.0, 2.0, 32, 40)
    assert grid.shape == (32, 40)
    np.testing.assert_array_equal(grid.v_plus, 0.5 * grid.v_minus)
    assert np.all(np.diff(grid.v_nodes) > 0)
    assert grid.v_nodes[0] > -4.0
    assert grid.x_faces[0] == 0.0 and grid.x_faces[-1] == 2.0
    assert np.sum(grid.area) == pytest.approx(2.0 * (4.0 + 2.0), rel=1e-12)

    elastic = build_grid(1.0, 1.0, 1.0, 32, 32)
    np.testing.assert_allclose(elastic.v_nodes, -elastic.v_nodes[::-1], rtol=0, atol=1e-15)

    graded = build_grid(0.1, 1.0, 1.0, 64, 64, x_stretch=4.0, v_first=0.005)
    assert graded.dx[0] < graded.dx[-1]
    assert graded.v_widths_minus[0] == pytest.approx(0.005)
    assert graded.v_minus[-1] < 10.0


def test_grid_rejected():
    """Test that infeasible grids name every offending field."""
    with pytest.raises(ConfigurationError) as info:
        build_grid(1.5, 1.0, 1.0, 16, 33)
    fields = " ".join(info.value.fields)
    assert "r:" in fields and "n_x:" in fields and "n_v:" in fields

    with pytest.raises(ConfigurationError):
        build_grid(0.5, 1.0, 1.0, 32, 32, v_first=1.0)


def test_kolmogorov_kernel():
    """Test the kernel: unit mass, mean and the rejected time."""
    x = np.linspace(-3.0, 5.0, 801)
    v = np.linspace(-5.0, 5.0, 801)
    values = kolmogorov_kernel(x[:, None], v[None, :], 0.5, 1.0, 0.4)
    cell = (x[1] - x[0]) * (v[1] - v[0])
    assert values.sum() * cell == pytest.approx(1.0, rel=1e-4)
    mean_x = (values * x[:, None]).sum() * cell
    assert mean_x == pytest.approx(1.0 + 0.4 * 0.5, rel=1e-4)

    with pytest.raises(DomainError):
        kolmogorov_kernel(0.0, 0.0, 0.0, 1.0, 0.0)


def test_initial_density():
    """Test that initial data is normalized and vanishes on excised cells."""
    grid = build_grid(0.5, 2.0, 2.0, 32, 32)
    P = initial_density(GaussianBlob(), grid)
    assert np.sum(P * grid.area) == pytest.approx(1.0, rel=1e-14)

    excised = grid.norm < 0.05
    assert excised.any()
    P = initial_density(ProfileCutoff(gamma=TRIVIAL_ROOT, radius=0.5), grid, excised)
    assert np.all(P[excised] == 0.0)
    assert np.sum(P * grid.area) == pytest.approx(1.0, rel=1e-14)


def test_wall_ghost():
    """Test the ghost values P(0, r u) = r^-2 P(0, -u)."""
    grid = build_grid(0.5, 2.0, 2.0, 32, 32)
    P = np.zeros(grid.shape)
    P[0, : grid.n_half] = 3.0
    state = apply_wall_bc(SolverState(P=P), grid)
    np.testing.assert_allclose(state.ghost, 12.0)

    # the ghost of the slowest incoming cell comes from the slowest outgoing one
    P = np.zeros(grid.shape)
    P[0, grid.n_half - 1] = 1.0
    state = apply_wall_bc(SolverState(P=P), grid)
    assert state.ghost[0] == 4.0
    assert np.count_nonzero(state.ghost) == 1


def test_sealed_step_conserves_mass():
    """Test that with a closed far wall and no excision the step conserves int P exactly."""
    grid = build_grid(0.5, 2.0, 2.0, 32, 32)
    state = SolverState(P=initial_density(GaussianBlob(center=(0.4, -0.5)), grid))
    for _ in range(50):
        state = advance(state, grid, 2e-3, sealed=True)
    assert np.sum(state.P * grid.area) == pytest.approx(1.0, abs=1e-12)
    assert state.m == 0.0 and state.outflow == 0.0
    assert state.t == pytest.approx(0.1)


def test_transport_of_constant_rows():
    """Test that data constant in x is left unchanged by transport away from the edges."""
    grid = build_grid(0.5, 2.0, 2.0, 32, 32)
    profile = np.exp(-grid.v_nodes ** 2)
    P = np.tile(profile, (grid.shape[0], 1))
    new = advance(SolverState(P=P), grid, 2e-3, sealed=True)
    # interior rows see identical transport, so they stay identical to each other
    np.testing.assert_allclose(new.P[1:-1], np.broadcast_to(new.P[1], new.P[1:-1].shape), rtol=1e-13)


def test_cfl_violation():
    """Test that the explicit scheme refuses a step beyond the CFL bound."""
    grid = build_grid(0.5, 2.0, 2.0, 32, 32)
    with pytest.raises(ConfigurationError):
        advance(SolverState(P=np.zeros(grid.shape)), grid, 0.1)
    # small r stretches the velocity range to V_max/r
    with pytest.raises(ConfigurationError):
        Solver(parse_solver_config({"r": 0.1}))


def test_fit_recovers_profiles(corner_grid):
    """Test that the corner fit recovers a known combination of the two profiles."""
    x, v = grid_arrays(corner_grid)
    alpha = alpha_of_r(0.1)

    pure = SolverState(P=g_field(TRIVIAL_ROOT, x, v))
    fit = fit_origin(pure, corner_grid, 0.05)
    assert fit.a_m23 == pytest.approx(1.0, rel=1e-8)
    assert fit.a_alpha == pytest.approx(0.0, abs=1e-8)
    assert fit.reliable
    assert fit.points >= 4

    mixed = SolverState(P=2.0 * g_field(alpha, x, v) + 3.0 * g_field(TRIVIAL_ROOT, x, v))
    fit = fit_origin(mixed, corner_grid, 0.05, alpha)
    assert fit.a_alpha == pytest.approx(2.0, rel=1e-6)
    assert fit.a_m23 == pytest.approx(3.0, rel=1e-6)
    assert fit.residual < 1e-10


def test_fit_unresolved(corner_grid):
    """Test that a radius below the grid resolution is rejected."""
    state = SolverState(P=np.ones(corner_grid.shape))
    with pytest.raises(DomainError):
        fit_origin(state, corner_grid, 1e-12)


def test_solver_run(small_config):
    """Test the snapshots of a run and the closed-wall ledger."""
    solver = Solver(small_config, sealed=True)
    states = list(solver.run())
    # the initial state plus one snapshot every 10 of the 50 steps
    assert len(states) == 6
    assert states[0].t == 0.0
    assert states[-1].t == pytest.approx(0.1)
    for state in states:
        assert solver.ledger_gap(state) < 1e-12


def test_ledger_with_excision(trapping_config):
    """Test that int P + m + outflow stays at its initial value with the corner absorbing."""
    table = run_diagnostic(trapping_config)
    assert list(table.columns) == [
        "t", "total_mass", "m", "outflow", "a_alpha", "a_m23", "stderr_m23", "fit_residual",
        "mode_residual", "ledger_gap", "dmass_dt", "flux_law_residual",
    ]
    assert len(table) == 5
    assert table["ledger_gap"].max() < 1e-10
    assert np.all(np.diff(table["m"]) >= 0)
    assert np.all(table["outflow"] >= 0)
    np.testing.assert_allclose(table["mode_residual"], table["a_alpha"].abs())


def test_release_keeps_ledger(trapping_config):
    """Test that releasing corner mass back into the domain keeps the ledger closed."""
    config = trapping_config.model_copy(update={"mode": "partial", "release_rate": 5.0, "mu_star": 1.0})
    solver = Solver(config)
    *_, state = solver.run()
    assert solver.ledger_gap(state) < 1e-10


@pytest.mark.slow
def test_interior_kernel_accuracy():
    """Test the elastic interior run against the Kolmogorov kernel."""
    t0, t1, x0 = 0.25, 0.5, 1.5
    blob = GaussianBlob(center=(x0, 0.0), covariance=((2 * t0 ** 3 / 3, t0 ** 2), (t0 ** 2, 2 * t0)))
    errors = []
    for n in (128, 256):
        config = parse_solver_config(
            {
                "r": 1.0, "mode": "supercritical", "X_max": 3.0, "V_max": 3.0, "n_x": n, "n_v": n,
                "dt": 1e-3, "T": t1 - t0, "rho_cut": 0.0, "initial": blob.model_dump(),
            }
        )
        solver = Solver(config)
        *_, state = solver.run()
        grid = solver.grid
        exact = kolmogorov_kernel(grid.x_nodes[:, None], grid.v_nodes[None, :], t1, x0, 0.0)
        errors.append(float(np.sum(np.abs(state.P - exact) * grid.area)))
    assert errors[1] < 0.03
    assert errors[1] < errors[0]


@pytest.mark.slow
def test_subcritical_mass_law():
    """Test dM/dt = -kappa a_m23 once the corner profile has settled."""
    config = parse_solver_config(
        {
            "r": 0.1, "mode": "trapping", "X_max": 2.0, "V_max": 1.0, "n_x": 128, "n_v": 128,
            "x_stretch": 3.0, "v_first": 0.01, "dt": 1e-3, "T": 0.5, "rho_cut": 1e-3,
            "scheme": "implicit", "initial": {"kind": "profile", "gamma": TRIVIAL_ROOT, "radius": 0.5},
        }
    )
    table = run_diagnostic(config)
    assert table["ledger_gap"].max() < 1e-10
    assert table["m"].iloc[-1] > 0
    assert table["total_mass"].iloc[-1] < table["total_mass"].iloc[0]
    settled = table[(table["fit_residual"] < 0.1) & (table["t"] > 0.05)]
    assert len(settled) > 0
    assert settled["flux_law_residual"].median() < 0.1
