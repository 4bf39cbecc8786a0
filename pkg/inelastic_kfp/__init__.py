"""
Inelastic KFP Toolkit

This package provides numerical experiments for the kinetic Fokker-Planck
equation on a half line with an inelastic wall, categorized into:
- Special Functions and Exponents
- Self-Similar Profiles and Boundary Fluxes
- Particle Monte Carlo and Lattice Models
- Kinetic Solver

It also provides the registry of acceptance checks run by ``inelastic-kfp verify-all``.
"""

__version__ = "0.1.0"

from .experiments_controller import Experiments
from . import (
    exponents,
    fluxes,
    kfp_solver,
    lattice_toy,
    particle_mc,
    profiles,
    specfun,
)
from .utils import AcceptanceRegistry, acceptance_registry

__all__ = [
    'Experiments',
    'exponents',
    'fluxes',
    'kfp_solver',
    'lattice_toy',
    'particle_mc',
    'profiles',
    'specfun',
    'AcceptanceRegistry',
    'acceptance_registry',
]
