"""
Config Module

Validated run configurations for the solver and the Monte Carlo scan, and a
JSON loader that reports every invalid field at once.
"""

import json
import logging
import math
from pathlib import Path
from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from inelastic_kfp.utils.helpers import ConfigurationError

logger = logging.getLogger(__name__)

R_C = math.exp(-math.pi / math.sqrt(3.0))
SUBCRITICAL_MODES = ("trapping", "nontrapping", "partial")


class GaussianBlob(BaseModel):
    """Bivariate Gaussian initial density, normalized to unit mass on the grid."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["gaussian"] = "gaussian"
    center: tuple[float, float] = Field((1.0, 0.0), description="Centre (x, v)")
    covariance: tuple[tuple[float, float], tuple[float, float]] = Field(
        ((0.05, 0.0), (0.0, 0.25)), description="Covariance matrix in (x, v)"
    )

    @model_validator(mode="after")
    def _positive_definite(self):
        (a, b), (c, d) = self.covariance
        if b != c:
            raise ValueError("covariance must be symmetric")
        if not (a > 0 and a * d - b * c > 0):
            raise ValueError("covariance must be positive definite")
        return self


class ProfileCutoff(BaseModel):
    """Initial density G_gamma(x, v) exp(-((x + |v|^3)/radius)^2), normalized to unit mass."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["profile"] = "profile"
    gamma: float = Field(-2.0 / 3.0, gt=-5.0 / 6.0, lt=1.0 / 6.0)
    radius: float = Field(0.5, gt=0)


InitialData = Annotated[Union[GaussianBlob, ProfileCutoff], Field(discriminator="kind")]


class SolverConfig(BaseModel):
    """
    Configuration of one kinetic Fokker-Planck run.

    The mode only selects the diagnostic residual; the dynamics always use the
    inelastic wall condition. Subcritical modes need r < r_c and the
    supercritical mode needs r > r_c.
    """

    model_config = ConfigDict(extra="forbid")

    r: float = Field(..., gt=0, le=1)
    mode: Literal["trapping", "nontrapping", "partial", "supercritical"] = "trapping"
    mu_star: float = Field(0.0, ge=0)
    X_max: float = Field(4.0, gt=0)
    V_max: float = Field(4.0, gt=0)
    n_x: int = Field(128, ge=32)
    n_v: int = Field(128, ge=32)
    x_stretch: float = Field(0.0, ge=0, description="Exponential grading of x faces; 0 is uniform")
    v_first: float | None = Field(None, gt=0, description="Width of the first |v| cell; None is uniform")
    dt: float = Field(1e-3, gt=0)
    T: float = Field(1.0, gt=0)
    rho_cut: float = Field(1e-3, ge=0)
    rho_fit: float | None = Field(None, gt=0)
    scheme: Literal["explicit", "implicit"] = "explicit"
    release_rate: float = Field(0.0, ge=0)
    output_every: int = Field(10, ge=1)
    initial: InitialData = Field(default_factory=GaussianBlob)

    @model_validator(mode="after")
    def _cross_checks(self):
        if self.n_v % 2:
            raise ValueError("n_v must be even (paired velocity cells)")
        if self.mode in SUBCRITICAL_MODES and not self.r < R_C:
            raise ValueError(f"mode '{self.mode}' needs r < r_c = {R_C:.6f}")
        if self.mode == "supercritical" and not self.r > R_C:
            raise ValueError(f"mode 'supercritical' needs r > r_c = {R_C:.6f}")
        if self.rho_fit is None:
            self.rho_fit = 4.0 * self.rho_cut if self.rho_cut > 0 else 0.1
        if self.rho_fit <= self.rho_cut:
            raise ValueError("rho_fit must exceed rho_cut")
        return self


class ScanConfig(BaseModel):
    """Parameters of the Monte Carlo collapse scan."""

    model_config = ConfigDict(extra="forbid")

    r_grid: list[float] = Field(default_factory=lambda: [0.05, 0.08, 0.11, 0.14, 0.2, 0.3, 0.5])
    paths: int = Field(1000, ge=10)
    ratio_samples: int | None = Field(None, ge=10)
    start_speed: float = Field(1e-3, gt=0)
    speed_floor: float = Field(1e-9, gt=0)
    t_max: float = Field(50.0, gt=0)
    max_bounces: int = Field(1000, ge=1)
    workers: int = Field(1, ge=1)

    @model_validator(mode="after")
    def _grid_range(self):
        bad = [r for r in self.r_grid if not (0.02 < r < 0.9 or r == 1.0)]
        if bad:
            raise ValueError(f"r values {bad} outside (0.02, 0.9)")
        return self


def _field_messages(error: ValidationError) -> list[str]:
    messages = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "config"
        messages.append(f"{location}: {item['msg']}")
    return messages


def parse_solver_config(data: dict) -> SolverConfig:
    """
    Validate a mapping as a SolverConfig.

    Args:
        data (dict): Raw configuration.

    Returns:
        SolverConfig: The validated configuration.

    Raises:
        ConfigurationError: Naming every invalid or missing field.
    """
    try:
        return SolverConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError("invalid solver configuration", _field_messages(e)) from e


def parse_scan_config(data: dict) -> ScanConfig:
    """Validate a mapping as a ScanConfig, raising ConfigurationError on failure."""
    try:
        return ScanConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError("invalid scan configuration", _field_messages(e)) from e


def _read_json(path) -> dict:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigurationError(f"cannot read configuration {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigurationError(f"configuration {path} must hold a JSON object")
    logger.debug("loaded configuration from %s", path)
    return data


def load_solver_config(path) -> SolverConfig:
    """
    Read and validate a solver configuration from a JSON file.

    Args:
        path (str | Path): Path to the JSON file.

    Returns:
        SolverConfig: The validated configuration.
    """
    return parse_solver_config(_read_json(path))


def load_scan_config(path) -> ScanConfig:
    """Read and validate a Monte Carlo scan configuration from a JSON file."""
    return parse_scan_config(_read_json(path))
