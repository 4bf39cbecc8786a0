"""
Lattice Toy Module

This module implements the half-lattice random walk with a sticky wall site and
compares its diffusive limit with the continuum heat equation under the
boundary conditions produced by the three wall rules:

1. Lattice Walk (3 functions)
   - step_lattice
   - run_lattice
   - diffusive_limit

2. Continuum References (4 functions)
   - dirichlet_reference
   - neumann_reference
   - robin_reference
   - richardson_check

3. Comparison (1 function)
   - lattice_report

Total Functions: 8

Note: a walker at n >= 1 moves to n - 1 or n + 1 with probability 1/2 each; at
the wall site n = 0 it leaves to n = 1 with probability lambda and stays
otherwise. Trapping is lambda = 0, the partial mode uses lambda = mu h, and
time advances by h^2 per step. The far end of the truncated lattice is a
lazily reflecting site.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid
from scipy.linalg import solve_banded
from scipy.special import erfc

from inelastic_kfp.utils.helpers import DomainError, l1_gap

logger = logging.getLogger(__name__)

TAIL_WIDTHS = 10.0
# the Robin reference starts from the free kernel at this time
STARTUP_TIME = 0.02
ROBIN_CELLS = 2000
ROBIN_STEPS = 2000


@dataclass(frozen=True)
class LatticeConfig:
    """
    Lattice spacing and wall rule.

    Args:
        h (float): Lattice spacing; one step lasts h^2.
        mode (str): "trapping", "nontrapping" (escape probability lam) or "partial" (lam = mu h).
        lam (float): Escape probability of the nontrapping mode, in (0, 1].
        mu (float): Robin coefficient of the partial mode, mu h <= 1.
    """

    h: float
    mode: Literal["trapping", "nontrapping", "partial"] = "trapping"
    lam: float = 1.0
    mu: float = 1.0

    def __post_init__(self):
        if not self.h > 0:
            raise DomainError(f"lattice spacing must be positive, got h={self.h}")
        if self.mode == "nontrapping" and not 0 < self.lam <= 1:
            raise DomainError(f"nontrapping escape probability must lie in (0, 1], got {self.lam}")
        if self.mode == "partial" and not 0 < self.mu * self.h <= 1:
            raise DomainError(f"partial mode needs 0 < mu h <= 1, got mu={self.mu}, h={self.h}")

    @property
    def escape_probability(self) -> float:
        if self.mode == "trapping":
            return 0.0
        if self.mode == "nontrapping":
            return self.lam
        return self.mu * self.h


@dataclass
class LatticeState:
    """Occupancy probabilities P_n(k), n = 0..N, after k steps."""

    occupancy: np.ndarray
    k: int = 0
    previous: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def point_mass(cls, n0: int, sites: int) -> "LatticeState":
        if not 0 <= n0 < sites:
            raise DomainError(f"initial site {n0} outside the lattice of {sites} sites")
        occupancy = np.zeros(sites)
        occupancy[n0] = 1.0
        return cls(occupancy=occupancy)

    @property
    def mass(self) -> float:
        return float(self.occupancy.sum())


@dataclass(frozen=True)
class DiffusiveLimit:
    """Lattice density on x = nh, n >= 1, and the wall atom m_h."""

    x: np.ndarray
    density: np.ndarray
    m: float

    @property
    def wall_value(self) -> float:
        """Linear extrapolation 2 U_1 - U_2 of the density to x = 0."""
        return 2.0 * self.density[0] - self.density[1]


@dataclass(frozen=True)
class RobinSolution:
    """Finite-volume density at cell centres plus the wall mass."""

    x: np.ndarray
    density: np.ndarray
    m: float
    dx: float

    @property
    def total_mass(self) -> float:
        return float(self.density.sum() * self.dx + self.m)


# ---------------------
# 1. Lattice Walk
# ---------------------

def step_lattice(state: LatticeState, cfg: LatticeConfig) -> LatticeState:
    """
    One synchronous update of the occupancy vector.

    Args:
        state (LatticeState): Current occupancy, at least two sites.
        cfg (LatticeConfig): Wall rule.

    Returns:
        LatticeState: Occupancy after one step; the row-stochastic update conserves mass.
    """
    p = state.occupancy
    if p.size < 2:
        raise DomainError("the lattice needs at least the wall site and one interior site")
    lam = cfg.escape_probability
    new = np.zeros_like(p)
    new[0] = (1.0 - lam) * p[0]
    new[1] = lam * p[0]
    half = 0.5 * p[1:]
    new[:-1] += half
    new[2:] += half[:-1]
    new[-1] += half[-1]
    return LatticeState(occupancy=new, k=state.k + 1, previous=p)


def _steps_for(t_phys: float, h: float) -> int:
    steps = t_phys / (h * h)
    k = int(round(steps))
    if k < 1 or abs(steps - k) > 1e-6 * max(1.0, steps):
        raise DomainError(f"t/h^2 = {steps:.6g} is not a positive integer number of steps")
    return k


def run_lattice(cfg: LatticeConfig, t_phys: float, x0: float = 1.0) -> LatticeState:
    """
    Run the walk from a point mass at x0 for t_phys / h^2 steps.

    The lattice is truncated at N = n0 + ceil(10 sqrt(t)/h).

    Args:
        cfg (LatticeConfig): Spacing and wall rule.
        t_phys (float): Physical time.
        x0 (float): Starting position, a multiple of h.

    Returns:
        LatticeState: The final state, with the previous occupancy retained.
    """
    steps = _steps_for(t_phys, cfg.h)
    n0 = int(round(x0 / cfg.h))
    if abs(n0 * cfg.h - x0) > 1e-9 * max(1.0, x0):
        raise DomainError(f"x0={x0} is not a lattice point for h={cfg.h}")
    sites = n0 + math.ceil(TAIL_WIDTHS * math.sqrt(t_phys) / cfg.h) + 1
    state = LatticeState.point_mass(n0, sites)
    for _ in range(steps):
        state = step_lattice(state, cfg)
    logger.debug("lattice %s: %d steps on %d sites, mass %.15f", cfg.mode, steps, sites, state.mass)
    return state


def diffusive_limit(cfg: LatticeConfig, t_phys: float, x0: float = 1.0) -> DiffusiveLimit:
    """
    Rescale the lattice occupancy to a density on x > 0 plus the wall atom.

    Occupied sites alternate in parity from step to step, so the density is
    (P_n(k) + P_n(k-1)) / (2h).

    Args:
        cfg (LatticeConfig): Spacing and wall rule.
        t_phys (float): Physical time, an integer multiple of h^2.
        x0 (float): Starting position.

    Returns:
        DiffusiveLimit: Density at x = nh (n >= 1) and m_h = P_0(k).
    """
    state = run_lattice(cfg, t_phys, x0)
    averaged = 0.5 * (state.occupancy + state.previous)
    n = np.arange(1, state.occupancy.size)
    return DiffusiveLimit(x=n * cfg.h, density=averaged[1:] / cfg.h, m=float(state.occupancy[0]))


# ---------------------
# 2. Continuum References
# ---------------------

def _heat_kernel(x: np.ndarray, t: float) -> np.ndarray:
    return np.exp(-x * x / (2.0 * t)) / math.sqrt(2.0 * math.pi * t)


def dirichlet_reference(x, x0: float, t: float) -> np.ndarray:
    """Image solution of U_t = U_xx / 2 with U(0, t) = 0 from a point mass at x0."""
    x = np.asarray(x, dtype=float)
    return _heat_kernel(x - x0, t) - _heat_kernel(x + x0, t)


def neumann_reference(x, x0: float, t: float) -> np.ndarray:
    """Image solution of U_t = U_xx / 2 with U_x(0, t) = 0 from a point mass at x0."""
    x = np.asarray(x, dtype=float)
    return _heat_kernel(x - x0, t) + _heat_kernel(x + x0, t)


def robin_reference(
    mu: float, x0: float, t: float, cells: int = ROBIN_CELLS, steps: int = ROBIN_STEPS
) -> RobinSolution:
    """
    Implicit finite-volume solution of the partially trapping wall problem.

        U_t = U_xx / 2 on x > 0,   m'(t) = U_x(0, t) / 2,   U(0, t) = 2 mu m(t)

    The wall flux is booked to m, so int U + m is conserved to round-off by
    every backward-Euler step. The run starts at t = 0.02 from the free heat
    kernel around x0, whose mass near the wall is negligible for x0 of order one.

    Args:
        mu (float): Robin coefficient, mu >= 0 (mu = 0 is the Dirichlet problem).
        x0 (float): Starting position.
        t (float): Final time, t > 0.02.
        cells (int): Number of finite-volume cells.
        steps (int): Number of time steps.

    Returns:
        RobinSolution: Cell-centre density, wall mass and cell width.
    """
    if mu < 0:
        raise DomainError(f"Robin coefficient must be nonnegative, got mu={mu}")
    if not t > STARTUP_TIME:
        raise DomainError(f"reference time must exceed {STARTUP_TIME}, got t={t}")
    length = x0 + TAIL_WIDTHS * math.sqrt(t)
    dx = length / cells
    dt = (t - STARTUP_TIME) / steps
    x = (np.arange(cells) + 0.5) * dx
    density = _heat_kernel(x - x0, STARTUP_TIME)
    density /= density.sum() * dx
    m = 0.0

    a = dt / dx
    c = dt / (2.0 * dx * dx)
    n = cells + 1
    ab = np.zeros((3, n))
    # row 0 is the wall mass m, rows 1.. are the cells
    ab[1, 0] = 1.0 + 2.0 * mu * a
    ab[0, 1] = -a
    ab[2, 0] = -4.0 * mu * c
    ab[1, 1] = 1.0 + 3.0 * c
    ab[1, 2:] = 1.0 + 2.0 * c
    ab[1, -1] = 1.0 + c
    ab[0, 2:] = -c
    ab[2, 1:-1] = -c

    state = np.concatenate([[m], density])
    for _ in range(steps):
        state = solve_banded((1, 1), ab, state)
    solution = RobinSolution(x=x, density=state[1:], m=float(state[0]), dx=dx)
    logger.debug("robin_reference(mu=%g, t=%g): m=%.8f, total=%.15f", mu, t, solution.m, solution.total_mass)
    return solution


def richardson_check(mu: float, x0: float, t: float) -> dict:
    """
    Compare the Robin reference with a run on twice as many cells and steps.

    Args:
        mu (float): Robin coefficient.
        x0 (float): Starting position.
        t (float): Final time.

    Returns:
        dict: l1_gap between the coarse density and the pairwise-averaged fine
            density, and mass_gap between the wall masses.
    """
    coarse = robin_reference(mu, x0, t)
    fine = robin_reference(mu, x0, t, cells=2 * ROBIN_CELLS, steps=2 * ROBIN_STEPS)
    aggregated = fine.density.reshape(-1, 2).mean(axis=1)
    gap = float(np.sum(np.abs(aggregated - coarse.density)) * coarse.dx)
    return {"l1_gap": gap, "mass_gap": abs(fine.m - coarse.m)}


# ---------------------
# 3. Comparison
# ---------------------

def lattice_report(
    mode: str, h: float, t: float, x0: float = 1.0, mu: float = 1.0, lam: float = 1.0
) -> tuple[pd.DataFrame, dict]:
    """
    Run the lattice and compare it with the continuum reference of its wall rule.

    Args:
        mode (str): "trapping", "nontrapping" or "partial".
        h (float): Lattice spacing.
        t (float): Physical time.
        x0 (float): Starting position.
        mu (float): Robin coefficient (partial mode).
        lam (float): Escape probability (nontrapping mode).

    Returns:
        tuple[pd.DataFrame, dict]: Table with columns x, U_h, U_ref and a
            summary with mode, h, t, L1_gap, m_h, m_ref.
    """
    cfg = LatticeConfig(h=h, mode=mode, lam=lam, mu=mu)
    limit = diffusive_limit(cfg, t, x0)
    if mode == "trapping":
        reference = dirichlet_reference(limit.x, x0, t)
        m_ref = float(erfc(x0 / math.sqrt(2.0 * t)))
    elif mode == "nontrapping":
        reference = neumann_reference(limit.x, x0, t)
        m_ref = 0.0
    else:
        robin = robin_reference(mu, x0, t)
        reference = np.interp(limit.x, robin.x, robin.density)
        m_ref = robin.m
    table = pd.DataFrame({"x": limit.x, "U_h": limit.density, "U_ref": reference})
    summary = {
        "mode": mode,
        "h": h,
        "t": t,
        "L1_gap": l1_gap(limit.x, limit.density, reference),
        "m_h": limit.m,
        "m_ref": m_ref,
        "lattice_mass": float(trapezoid(limit.density, limit.x) + limit.m),
    }
    logger.info("lattice %s h=%g: L1 gap %.4g, m_h=%.5f, m_ref=%.5f", mode, h, summary["L1_gap"], limit.m, m_ref)
    return table, summary
