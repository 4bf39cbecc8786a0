import math

import numpy as np
import pandas as pd
import pytest
from scipy import integrate

from inelastic_kfp.particle_mc import (
    ParticleState,
    ZeroNoise,
    bounce_chain,
    bounce_chains,
    collapse_threshold_scan,
    estimate_critical_r,
    exact_increment,
    hitting_speed_sample,
    mckean_density,
    reflect,
    run_to_wall,
)
from inelastic_kfp.utils.helpers import ContractViolation, DomainError

PI_OVER_ROOT3 = math.pi / math.sqrt(3.0)


@pytest.fixture
def increments():
    # (dV, dX - V dt) over many independent steps from the same state
    rng = np.random.default_rng(7)
    start = ParticleState(x=5.0, v=0.3)
    dt = 0.01
    draws = rng.standard_normal((100_000, 2))
    dv = np.empty(len(draws))
    dx = np.empty(len(draws))
    for i, (a, b) in enumerate(draws):
        new = exact_increment(start, dt, (a, b))
        dv[i] = new.v - start.v
        dx[i] = new.x - start.x - start.v * dt
    return dt, dv, dx


def test_exact_increment_skeleton():
    """Test the zero-noise transition and the rejected inputs."""
    new = exact_increment(ParticleState(1.0, -0.5, 2.0), 0.1, (0.0, 0.0))
    assert new.x == pytest.approx(0.95, rel=1e-14)
    assert new.v == -0.5
    assert new.t == pytest.approx(2.1, rel=1e-14)

    with pytest.raises(DomainError):
        exact_increment(ParticleState(1.0, 0.0), 0.0, (0.0, 0.0))
    with pytest.raises(DomainError):
        ParticleState(-1.0, 0.0)


def test_exact_increment_statistics(increments):
    """Test Var(dV) = 2 dt and Corr(dV, dX - V dt) = sqrt(3)/2."""
    dt, dv, dx = increments
    assert np.var(dv) / (2 * dt) == pytest.approx(1.0, abs=0.02)
    assert np.var(dx) / (2 * dt ** 3 / 3) == pytest.approx(1.0, abs=0.02)
    assert np.corrcoef(dv, dx)[0, 1] == pytest.approx(math.sqrt(3.0) / 2, abs=0.005)


def test_reflect():
    """Test the inelastic reflection rule."""
    assert reflect(-1.0, 0.5) == 0.5
    assert reflect(-2.0, 1.0) == 2.0
    assert reflect(-0.1, 0.16303) == pytest.approx(0.016303, rel=1e-12)

    with pytest.raises(ContractViolation):
        reflect(0.0, 0.5)
    with pytest.raises(DomainError):
        reflect(-1.0, 1.5)


def test_run_to_wall_ballistic():
    """Test the deterministic flight from (1, -1): hit at t = 1 with speed 1."""
    hit, state = run_to_wall(ParticleState(1.0, -1.0), noise=ZeroNoise())
    assert hit.time == pytest.approx(1.0, rel=1e-12)
    assert hit.speed == 1.0
    assert state.x == 0.0
    assert state.v < 0

    with pytest.raises(ContractViolation):
        run_to_wall(ParticleState(0.0, -1.0))


def test_run_to_wall_time_limit():
    """Test that a flight away from the wall stops at t_max without a hit."""
    hit, state = run_to_wall(ParticleState(1.0, 1.0), t_max=5.0, noise=ZeroNoise())
    assert hit is None
    assert state.t == pytest.approx(5.0)
    assert state.x == pytest.approx(6.0)


def test_run_to_wall_scaling():
    """Test that with common noise the path from (8x, 2v) is the rescaled path from (x, v)."""
    hits = 0
    for seed in range(100):
        base, _ = run_to_wall(ParticleState(1.0, -0.5), t_max=1e4, seed=seed)
        scaled, _ = run_to_wall(ParticleState(8.0, -1.0), t_max=4e4, seed=seed)
        if base is None:
            assert scaled is None
            continue
        hits += 1
        assert scaled.time == pytest.approx(4.0 * base.time, rel=1e-10)
        assert scaled.speed == pytest.approx(2.0 * base.speed, rel=1e-10)
    assert hits > 50


def test_bounce_chain_ballistic():
    """Test that without noise a chain bounces once and then leaves the wall."""
    record = bounce_chain(0.5, ParticleState(1.0, -1.0), t_max=50.0, noise=ZeroNoise())
    assert record.n_bounces == 1
    assert record.hit_speeds == [pytest.approx(1.0)]
    assert record.terminated == "time_limit"
    assert not record.collapsed


def test_bounce_chains_reproducible():
    """Test that records depend on the seed but not on the worker count."""
    kwargs = dict(paths=40, t_max=5.0, seed=11, block_size=16)
    serial = bounce_chains(0.3, ParticleState(0.0, 1.0), **kwargs)
    threaded = bounce_chains(0.3, ParticleState(0.0, 1.0), workers=3, **kwargs)
    again = bounce_chains(0.3, ParticleState(0.0, 1.0), **kwargs)
    assert len(serial) == 40
    assert [rec.hit_times for rec in serial] == [rec.hit_times for rec in threaded]
    assert [rec.hit_speeds for rec in serial] == [rec.hit_speeds for rec in again]

    other = bounce_chains(0.3, ParticleState(0.0, 1.0), paths=40, t_max=5.0, seed=12, block_size=16)
    assert [rec.hit_times for rec in serial] != [rec.hit_times for rec in other]


def test_bounce_chains_small_r():
    """Test that chains far below r_c keep finite speeds down to the collapse floor."""
    records = bounce_chains(0.05, ParticleState(0.0, 1e-3), paths=50, speed_floor=1e-9, t_max=50.0, seed=2)
    for record in records:
        assert record.n_bounces > 0
        assert np.all(np.isfinite(record.hit_speeds))
        assert np.all(np.array(record.hit_speeds) > 0)
        assert np.all(np.diff(record.hit_times) >= 0)
    assert sum(record.collapsed for record in records) >= 45


def test_bounce_chains_cutoff():
    """Test the bounce cap and the input checks."""
    records = bounce_chains(1.0, ParticleState(0.0, 1.0), paths=5, max_bounces=2, t_max=1e6, seed=3)
    for record in records:
        assert record.n_bounces <= 2
        if record.n_bounces == 2:
            assert record.terminated == "cutoff"

    with pytest.raises(DomainError):
        bounce_chains(0.0, ParticleState(0.0, 1.0), paths=5)
    with pytest.raises(DomainError):
        bounce_chains(0.5, ParticleState(0.0, 1.0))


def test_hitting_speed_law():
    """Test the first-return speed from the wall against E[log H] = pi/sqrt(3)."""
    speeds = hitting_speed_sample(4000, seed=5)
    # flights longer than t_max are dropped; their share decays like t_max^(-1/4)
    assert speeds.size >= 3980
    assert np.all(speeds > 0)
    assert np.log(speeds).mean() == pytest.approx(PI_OVER_ROOT3, abs=0.15)


def test_mckean_density():
    """Test that the first-return density is normalized with E[log H] = pi/sqrt(3)."""
    total, _ = integrate.quad(mckean_density, 0.0, np.inf)
    assert total == pytest.approx(1.0, rel=1e-8)
    mean_log, _ = integrate.quad(lambda h: math.log(h) * mckean_density(h), 0.0, np.inf)
    assert mean_log == pytest.approx(PI_OVER_ROOT3, rel=1e-6)


def test_estimate_critical_r():
    """Test the crossing estimate on an exact table."""
    r = np.array([0.05, 0.1, 0.3, 0.5])
    table = pd.DataFrame({"r": r, "mean_log_ratio": np.log(r) + PI_OVER_ROOT3})
    assert estimate_critical_r(table) == pytest.approx(math.exp(-PI_OVER_ROOT3), rel=1e-10)

    with pytest.raises(DomainError):
        estimate_critical_r(table.iloc[:1])


def test_collapse_scan_small():
    """Test the collapse scan columns and the two sides of the threshold on a small run."""
    table = collapse_threshold_scan([0.05, 0.5], paths=100, seed=2)
    assert list(table.columns) == ["r", "paths", "collapse_fraction", "mean_log_ratio", "stderr_log_ratio"]
    low, high = table["collapse_fraction"]
    assert low > 0.8
    assert high < 0.2
    assert table["mean_log_ratio"].iloc[0] < 0 < table["mean_log_ratio"].iloc[1]


@pytest.mark.slow
def test_collapse_dichotomy():
    """Test the collapse fractions on each side of r_c with 1000 paths."""
    table = collapse_threshold_scan([0.05, 0.5], paths=1000, seed=0)
    assert table["collapse_fraction"].iloc[0] > 0.95
    assert table["collapse_fraction"].iloc[1] < 0.05


@pytest.mark.slow
def test_threshold_scan():
    """Test the threshold estimate, the elastic ratio and the monotone collapse fraction."""
    grid = [0.05, 0.08, 0.11, 0.14, 0.2, 0.3, 0.5]
    table = collapse_threshold_scan(grid, paths=1000, seed=1, ratio_samples=30_000)
    assert estimate_critical_r(table) == pytest.approx(0.163, abs=0.02)
    fractions = table["collapse_fraction"].to_numpy()
    # allow sampling noise between neighbours
    assert np.all(np.diff(fractions) < 0.05)

    elastic = collapse_threshold_scan([1.0], paths=100, seed=1, ratio_samples=100_000)
    assert elastic["mean_log_ratio"].iloc[0] == pytest.approx(PI_OVER_ROOT3, abs=0.05)


@pytest.mark.slow
def test_hitting_speed_law_large():
    """Test E[log H] over 1e5 flights."""
    speeds = hitting_speed_sample(100_000, seed=9, workers=4)
    assert np.log(speeds).mean() == pytest.approx(PI_OVER_ROOT3, abs=0.05)
