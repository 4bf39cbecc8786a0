"""
Particle Monte Carlo Module

This module simulates a Brownian particle on the half line x > 0 whose
velocity is Brownian motion (dX = V dt, dV = sqrt(2) dW) and which bounces
inelastically, V -> -r V, at the wall x = 0:

1. Free Flight (3 functions)
   - exact_increment
   - reflect
   - run_to_wall

2. Bounce Chains (3 functions)
   - bounce_chain
   - bounce_chains
   - hitting_speed_sample

3. Collapse Statistics (3 functions)
   - collapse_threshold_scan
   - estimate_critical_r
   - mckean_density

Total Functions: 9

Note: steps are exact samples of the free-flight transition law. A step that
ends below the wall is refined by bisection with the exact Gaussian bridge of
the flight between its endpoints, so refinement never changes the law of the
path. The step size c (x + |v|^3)^(2/3), rounded down to a power of two,
respects the invariance (x, v, t) -> (lambda^3 x, lambda v, lambda^2 t) exactly
for lambda a power of two. Bisection runs in time local to each step, so
brackets far smaller than the chain time stay resolved.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, Protocol

import numpy as np
import pandas as pd

from inelastic_kfp.utils.helpers import ContractViolation, DomainError

logger = logging.getLogger(__name__)

STEP_FACTOR = 0.02
DEFAULT_EPS_X = 1e-10
DEFAULT_SPEED_FLOOR = 1e-6
MAX_BISECTIONS = 200
# flight time from speed s is of order s^2; collapse needs this much slack before t_max
REMAINING_TIME_FACTOR = 10.0
HITTING_T_MAX = 1e12
BLOCK_SIZE = 256
MAX_BLOCK_STEPS = 10_000_000

Termination = Literal["cutoff", "collapse", "time_limit"]


class NoiseSource(Protocol):
    def standard_normal(self, size=None): ...


class ZeroNoise:
    """Noise source returning zeros; turns every path into its ballistic skeleton."""

    def standard_normal(self, size=None):
        return np.zeros(size) if size is not None else 0.0


@dataclass(frozen=True)
class ParticleState:
    """Position, velocity and time of the particle."""

    x: float
    v: float
    t: float = 0.0

    def __post_init__(self):
        if self.x < 0:
            raise DomainError(f"particle position must be >= 0, got x={self.x}")
        if self.t < 0:
            raise DomainError(f"time must be >= 0, got t={self.t}")


@dataclass(frozen=True)
class WallHit:
    """Time and incoming speed |V(t-)| of one wall collision."""

    time: float
    speed: float


@dataclass
class BounceRecord:
    """Wall collisions of one path and the reason the chain stopped."""

    hit_times: list[float] = field(default_factory=list)
    hit_speeds: list[float] = field(default_factory=list)
    terminated: Termination = "time_limit"

    @property
    def n_bounces(self) -> int:
        return len(self.hit_times)

    @property
    def collapsed(self) -> bool:
        return self.terminated == "collapse"


# ---------------------
# 1. Free Flight
# ---------------------

def exact_increment(state: ParticleState, dt: float, noise: tuple[float, float]) -> ParticleState:
    """
    Sample the free-flight transition over dt from two standard normal draws.

    dV = sqrt(2 dt) xi_1 and dX - V dt = dt dV / 2 + sqrt(dt^3 / 6) xi_2, which
    gives Var(dV) = 2 dt, Var(dX - V dt) = 2 dt^3 / 3 and Cov = dt^2.

    Args:
        state (ParticleState): Current state.
        dt (float): Time step, dt > 0.
        noise (tuple[float, float]): Standard normal pair (xi_1, xi_2).

    Returns:
        ParticleState: The state after dt, ignoring the wall.
    """
    if not dt > 0:
        raise DomainError(f"time step must be positive, got dt={dt}")
    xi_v, xi_x = noise
    dv = math.sqrt(2.0 * dt) * xi_v
    dx = state.v * dt + 0.5 * dt * dv + math.sqrt(dt ** 3 / 6.0) * xi_x
    return ParticleState(x=max(state.x + dx, 0.0), v=state.v + dv, t=state.t + dt)


def reflect(v_in: float, r: float) -> float:
    """
    Inelastic reflection V(t+) = -r V(t-).

    Args:
        v_in (float): Incoming velocity, v_in < 0.
        r (float): Restitution coefficient in (0, 1].

    Returns:
        float: The outgoing velocity -r v_in > 0.

    Raises:
        ContractViolation: If v_in >= 0.
    """
    if not v_in < 0:
        raise ContractViolation(f"only incoming velocities v < 0 are reflected, got {v_in}")
    if not 0 < r <= 1:
        raise DomainError(f"restitution coefficient must lie in (0, 1], got r={r}")
    return -r * v_in


def _bridge_bisection(xl, vl, xr, vr, gap_x, gap_v, width, noise: NoiseSource, eps_x: float):
    """
    Shrink a bracket around the first sign change of x using the exact free-flight bridge.

    Times are local to the bracket start. gap_x = xr - xl - width vl and
    gap_v = vr - vl are carried as increments, never recomputed from positions.
    Returns the local hit time and the incoming velocity.
    """
    offset = np.zeros(xl.shape)
    active = np.ones(xl.shape, dtype=bool)
    for _ in range(MAX_BISECTIONS):
        scale = np.maximum(np.abs(vl), np.abs(vr)) ** 3
        active &= ((xl - xr) > eps_x * scale) & (0.5 * width > 0)
        if not active.any():
            break
        idx = np.flatnonzero(active)
        h = 0.5 * width[idx]
        gx, gv, v0 = gap_x[idx], gap_v[idx], vl[idx]
        xi = noise.standard_normal((2, idx.size))
        # first-half increments given the whole bracket
        dv_a = 0.75 * (gx / h) - 0.25 * gv + np.sqrt(h / 4.0) * xi[0]
        gx_a = 0.5 * gx - 0.25 * h * gv + np.sqrt(h ** 3 / 12.0) * xi[1]
        xm = xl[idx] + v0 * h + gx_a
        vm = v0 + dv_a
        below = xm < 0
        keep = ~below
        left, right = idx[keep], idx[below]
        xl[left], vl[left] = xm[keep], vm[keep]
        offset[left] += h[keep]
        gap_x[left] = (gx - gx_a - h * dv_a)[keep]
        gap_v[left] = (gv - dv_a)[keep]
        xr[right], vr[right] = xm[below], vm[below]
        gap_x[right], gap_v[right] = gx_a[below], dv_a[below]
        width[idx] = h

    frac = xl / (xl - xr)
    tau = offset + frac * width
    v_hit = vl + frac * (vr - vl)
    fix = v_hit >= 0
    if fix.any():
        v_hit[fix] = np.minimum(vl[fix], vr[fix])
        v_hit[fix] = np.where(v_hit[fix] < 0, v_hit[fix], -np.finfo(float).tiny)
    return tau, v_hit


def _step_size(norm, dt_max, remaining):
    """STEP_FACTOR norm^(2/3) rounded down to a power of two, capped by dt_max and the remaining time."""
    target = STEP_FACTOR * norm ** (2.0 / 3.0)
    _, exponent = np.frexp(target)
    dt = np.where(target > 0, np.ldexp(0.5, exponent), 0.0)
    return np.minimum(np.minimum(dt, dt_max), remaining)


def _flight_step(x, v, t, noise: NoiseSource, dt_max: float, eps_x: float, t_max: float):
    """
    Advance every path by one adaptive step.

    Returns the new (x, v, t) and a mask of paths that reached the wall; for
    those x is 0, t is the hit time and v the incoming velocity.
    """
    dt = _step_size(x + np.abs(v) ** 3, dt_max, t_max - t)
    xi = noise.standard_normal((2, x.size))
    dv = np.sqrt(2.0 * dt) * xi[0]
    gx = 0.5 * dt * dv + np.sqrt(dt ** 3 / 6.0) * xi[1]
    x_new = x + v * dt + gx
    v_new = v + dv
    t_new = t + dt
    hit = x_new < 0
    if hit.any():
        tau, v_hit = _bridge_bisection(
            x[hit].copy(), v[hit].copy(), x_new[hit].copy(), v_new[hit].copy(),
            gx[hit].copy(), dv[hit].copy(), dt[hit].copy(),
            noise, eps_x,
        )
        x_new[hit] = 0.0
        v_new[hit] = v_hit
        t_new[hit] = t[hit] + tau
    return x_new, v_new, t_new, hit


def _check_start(x: float, v: float) -> None:
    if x < 0 or (x == 0 and not v > 0):
        raise ContractViolation(f"a flight starts in x > 0 or at the wall with v > 0, got ({x}, {v})")


def run_to_wall(
    start: ParticleState,
    dt_max: float = math.inf,
    eps_x: float = DEFAULT_EPS_X,
    t_max: float = math.inf,
    seed: int | None = None,
    noise: NoiseSource | None = None,
) -> tuple[WallHit | None, ParticleState]:
    """
    Follow one free flight until it first reaches the wall.

    Args:
        start (ParticleState): Start with x > 0, or x = 0 and v > 0.
        dt_max (float): Upper bound on the step.
        eps_x (float): Relative bracket width; bisection stops once
            x_left - x_right <= eps_x |v|^3.
        t_max (float): Time limit.
        seed (int, optional): Seed of the default generator.
        noise (NoiseSource, optional): Overrides the generator (e.g. ZeroNoise()).

    Returns:
        tuple[WallHit | None, ParticleState]: The hit (None when t_max is reached
            first) and the final state, snapped to x = 0 with v < 0 on a hit.
    """
    _check_start(start.x, start.v)
    noise = noise if noise is not None else np.random.default_rng(seed)
    x = np.array([start.x])
    v = np.array([start.v])
    t = np.array([start.t])
    while t[0] < t_max:
        x, v, t, hit = _flight_step(x, v, t, noise, dt_max, eps_x, t_max)
        if hit[0]:
            state = ParticleState(x=0.0, v=float(v[0]), t=float(t[0]))
            return WallHit(time=float(t[0]), speed=float(-v[0])), state
    logger.warning("flight from %s reached t_max=%g without a wall hit", start, t_max)
    return None, ParticleState(x=float(x[0]), v=float(v[0]), t=float(t[0]))


# ---------------------
# 2. Bounce Chains
# ---------------------

@dataclass(frozen=True)
class ChainSettings:
    """Stopping rules and step control shared by all paths of a run."""

    r: float
    max_bounces: int = 1000
    speed_floor: float = DEFAULT_SPEED_FLOOR
    t_max: float = 50.0
    dt_max: float = math.inf
    eps_x: float = DEFAULT_EPS_X


def _run_block(settings: ChainSettings, x: np.ndarray, v: np.ndarray, noise: NoiseSource) -> list[BounceRecord]:
    """Run a block of chains in lockstep, one adaptive step per loop."""
    n = x.size
    x = x.astype(float).copy()
    v = v.astype(float).copy()
    t = np.zeros(n)
    records = [BounceRecord() for _ in range(n)]
    active = np.ones(n, dtype=bool)
    r = settings.r

    for _ in range(MAX_BLOCK_STEPS):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        xs, vs, ts, hit = _flight_step(x[idx], v[idx], t[idx], noise, settings.dt_max, settings.eps_x, settings.t_max)
        x[idx], v[idx], t[idx] = xs, vs, ts
        for j in idx[hit]:
            speed = -v[j]
            record = records[j]
            record.hit_times.append(float(t[j]))
            record.hit_speeds.append(float(speed))
            v[j] = r * speed
            slow = v[j] < settings.speed_floor or v[j] == 0.0
            if record.n_bounces >= settings.max_bounces:
                record.terminated = "cutoff"
                active[j] = False
            elif slow and t[j] + REMAINING_TIME_FACTOR * v[j] ** 2 < settings.t_max:
                record.terminated = "collapse"
                active[j] = False
        active &= t < settings.t_max
    else:
        logger.warning("block stopped after %d steps with %d paths still running", MAX_BLOCK_STEPS, active.sum())
    return records


def bounce_chains(
    r: float,
    starts,
    paths: int | None = None,
    max_bounces: int = 1000,
    speed_floor: float = DEFAULT_SPEED_FLOOR,
    t_max: float = 50.0,
    seed: int = 0,
    dt_max: float = math.inf,
    eps_x: float = DEFAULT_EPS_X,
    block_size: int = BLOCK_SIZE,
    workers: int = 1,
    noise: NoiseSource | None = None,
) -> list[BounceRecord]:
    """
    Run many independent bounce chains.

    Paths are cut into fixed-size blocks; block i draws from a generator built
    on SeedSequence(seed).spawn(n_blocks)[i], so records depend on seed and
    block_size but not on the number of worker threads.

    Args:
        r (float): Restitution coefficient in (0, 1].
        starts (ParticleState | array-like): One start repeated ``paths`` times,
            or an (n, 2) array of (x, v) pairs.
        paths (int, optional): Number of paths when a single start is given.
        max_bounces (int): Bounce cap ("cutoff").
        speed_floor (float): Collapse speed threshold.
        t_max (float): Time limit.
        seed (int): Root seed.
        dt_max (float): Step cap.
        eps_x (float): Relative wall-bracket width.
        block_size (int): Paths per block.
        workers (int): Worker threads.
        noise (NoiseSource, optional): Shared noise source for every block (test hook).

    Returns:
        list[BounceRecord]: One record per path, in input order.
    """
    if not 0 < r <= 1:
        raise DomainError(f"restitution coefficient must lie in (0, 1], got r={r}")
    if isinstance(starts, ParticleState):
        if paths is None:
            raise DomainError("paths is required with a single start state")
        points = np.tile([starts.x, starts.v], (paths, 1))
    else:
        points = np.atleast_2d(np.asarray(starts, dtype=float))
    for px, pv in points:
        _check_start(px, pv)

    settings = ChainSettings(
        r=r, max_bounces=max_bounces, speed_floor=speed_floor, t_max=t_max, dt_max=dt_max, eps_x=eps_x
    )
    chunks = [points[i:i + block_size] for i in range(0, len(points), block_size)]
    if noise is None:
        sources = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(len(chunks))]
    else:
        sources = [noise] * len(chunks)

    def run(args):
        chunk, source = args
        return _run_block(settings, chunk[:, 0], chunk[:, 1], source)

    if workers > 1 and noise is None:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(run, zip(chunks, sources)))
    else:
        blocks = [run(item) for item in zip(chunks, sources)]
    records = [record for block in blocks for record in block]
    logger.debug("bounce_chains(r=%g): %d paths in %d blocks", r, len(records), len(chunks))
    return records


def bounce_chain(
    r: float,
    start: ParticleState,
    max_bounces: int = 1000,
    speed_floor: float = DEFAULT_SPEED_FLOOR,
    t_max: float = 50.0,
    seed: int = 0,
    dt_max: float = math.inf,
    eps_x: float = DEFAULT_EPS_X,
    noise: NoiseSource | None = None,
) -> BounceRecord:
    """
    Alternate free flights and reflections until a stopping rule fires.

    Stopping rules: max_bounces reached ("cutoff"); outgoing speed below
    speed_floor with t + 10 speed^2 < t_max ("collapse"); t_max ("time_limit").

    Args:
        r (float): Restitution coefficient in (0, 1].
        start (ParticleState): Start state.
        max_bounces (int): Bounce cap.
        speed_floor (float): Collapse speed threshold.
        t_max (float): Time limit.
        seed (int): Seed.
        dt_max (float): Step cap.
        eps_x (float): Relative wall-bracket width.
        noise (NoiseSource, optional): Test hook replacing the generator.

    Returns:
        BounceRecord: The collisions of the path.
    """
    return bounce_chains(
        r, start, paths=1, max_bounces=max_bounces, speed_floor=speed_floor, t_max=t_max,
        seed=seed, dt_max=dt_max, eps_x=eps_x, noise=noise,
    )[0]


def hitting_speed_sample(
    paths: int,
    seed: int = 0,
    eps_x: float = DEFAULT_EPS_X,
    t_max: float = HITTING_T_MAX,
    block_size: int = 4096,
    workers: int = 1,
) -> np.ndarray:
    """
    Sample the first-return speed H of a flight launched from the wall with unit speed.

    By scaling, consecutive speed ratios of any chain are r H with i.i.d. H, and
    the law of H has density (3/(2 pi)) h^(3/2)/(1 + h^3) with E[log H] = pi/sqrt(3).

    Args:
        paths (int): Number of flights.
        seed (int): Root seed.
        eps_x (float): Relative wall-bracket width.
        t_max (float): Flights longer than this are dropped.
        block_size (int): Paths per block.
        workers (int): Worker threads.

    Returns:
        np.ndarray: Speeds of the flights that returned before t_max.
    """
    records = bounce_chains(
        1.0, ParticleState(0.0, 1.0), paths=paths, max_bounces=1, speed_floor=0.0, t_max=t_max,
        seed=seed, eps_x=eps_x, block_size=block_size, workers=workers,
    )
    speeds = np.array([rec.hit_speeds[0] for rec in records if rec.n_bounces])
    dropped = paths - speeds.size
    if dropped:
        logger.warning("%d of %d flights did not return before t=%g", dropped, paths, t_max)
    return speeds


# ---------------------
# 3. Collapse Statistics
# ---------------------

def collapse_threshold_scan(
    r_grid,
    paths: int,
    seed: int = 0,
    start_speed: float = 1e-3,
    speed_floor: float = 1e-9,
    t_max: float = 50.0,
    max_bounces: int = 1000,
    ratio_samples: int | None = None,
    workers: int = 1,
) -> pd.DataFrame:
    """
    Collapse fraction and mean log speed ratio on a grid of restitution coefficients.

    Collapse is measured on chains started at the wall with speed start_speed.
    The mean log ratio log r + E[log H] is estimated from independent unit
    flights, which have the law of every consecutive ratio without the
    truncation bias of chains cut at t_max.

    Args:
        r_grid (list[float]): Coefficients in (0.02, 0.9) (r = 1 is also accepted).
        paths (int): Chains per coefficient.
        seed (int): Root seed; each r gets its own spawned child.
        start_speed (float): Launch speed of the chains.
        speed_floor (float): Collapse speed threshold.
        t_max (float): Time limit of the chains.
        max_bounces (int): Bounce cap.
        ratio_samples (int, optional): Unit flights per coefficient (defaults to paths).
        workers (int): Worker threads.

    Returns:
        pd.DataFrame: Columns r, paths, collapse_fraction, mean_log_ratio, stderr_log_ratio.
    """
    r_grid = [float(r) for r in r_grid]
    children = np.random.SeedSequence(seed).spawn(2 * len(r_grid))
    rows = []
    for i, r in enumerate(r_grid):
        chain_seed = int(children[2 * i].generate_state(1)[0])
        ratio_seed = int(children[2 * i + 1].generate_state(1)[0])
        records = bounce_chains(
            r, ParticleState(0.0, start_speed), paths=paths, max_bounces=max_bounces,
            speed_floor=speed_floor, t_max=t_max, seed=chain_seed, workers=workers,
        )
        collapse_fraction = float(np.mean([rec.collapsed for rec in records]))
        log_h = np.log(hitting_speed_sample(ratio_samples or paths, seed=ratio_seed, workers=workers))
        rows.append(
            {
                "r": r,
                "paths": paths,
                "collapse_fraction": collapse_fraction,
                "mean_log_ratio": math.log(r) + float(log_h.mean()),
                "stderr_log_ratio": float(log_h.std(ddof=1) / math.sqrt(log_h.size)),
            }
        )
        logger.info("r=%g: collapse fraction %.3f, mean log ratio %.4f", r, collapse_fraction, rows[-1]["mean_log_ratio"])
    return pd.DataFrame(rows)


def estimate_critical_r(table: pd.DataFrame) -> float:
    """
    Estimate r_c as the zero of a least-squares line of mean_log_ratio against log r.

    Args:
        table (pd.DataFrame): Output of collapse_threshold_scan with at least two rows.

    Returns:
        float: The estimated critical coefficient.
    """
    if len(table) < 2:
        raise DomainError("at least two scan rows are needed to locate the crossing")
    slope, intercept = np.polyfit(np.log(table["r"].to_numpy()), table["mean_log_ratio"].to_numpy(), 1)
    if slope <= 0:
        raise DomainError(f"mean log ratio does not increase with r (slope {slope:.3g})")
    return float(math.exp(-intercept / slope))


def mckean_density(h):
    """Density (3/(2 pi)) h^(3/2) / (1 + h^3) of the first-return speed from unit launch speed."""
    h = np.asarray(h, dtype=float)
    return 1.5 / math.pi * h ** 1.5 / (1.0 + h ** 3)
