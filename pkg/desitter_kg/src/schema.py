"""Schema definitions for experiment configurations.

This module contains the Pydantic models that validate the JSON experiment
configuration consumed by every subcommand, together with ``load_config``
which turns validation failures into ``ConfigurationException`` messages
listing the offending field paths.
"""

from __future__ import annotations

from enum import Enum
from pathlib import Path
from typing import Any, Literal

import numpy as np
import orjson
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from desitter_kg.src.core.evolution import Laplacian, Operator, VariableCoefficient1D
from desitter_kg.src.core.exceptions.exceptions import ConfigurationException
from desitter_kg.src.core.field import (
    PeriodicGrid,
    SpectralField,
    constant,
    cosine_mode,
    gaussian_bump,
    positive_bump,
    random_bandlimited,
)
from desitter_kg.src.core.kernels import KernelKind, ModelParams
from desitter_kg.src.core.semilinear import NonlinearSpec, PicardConfig, Profile
from desitter_kg.src.core.transform import QuadratureSpec
from desitter_kg.src.core.verify import BoundCheckSpec, DecayCase
from desitter_kg.src.settings import settings


class RunKind(str, Enum):
    """Experiment selected by a configuration."""

    KERNEL_EVAL = "kernel_eval"
    SOLVE_LINEAR = "solve_linear"
    SOLVE_DIRECT = "solve_direct"
    SOLVE_SEMILINEAR = "solve_semilinear"
    LIFESPAN_SWEEP = "lifespan_sweep"
    VERIFY_DECAY = "verify_decay"
    VERIFY_BOUNDS = "verify_bounds"
    VERIFY_APPENDIX = "verify_appendix"


class ModelConfig(ModelParams):
    """Model section: n, m2 or M, Sobolev index and Lipschitz exponent.

    Either ``m2`` or ``M`` may be given; the other is filled with the principal
    root. Supplying both requires M^2 = n^2/4 - m2.
    """


class GridConfig(BaseModel):
    """Periodic grid section."""

    model_config = ConfigDict(frozen=True)

    d: Literal[1, 2] = Field(default=1, description="Spatial dimension of the torus.", examples=[1])
    npts: int = Field(default=256, description="Points per axis, a power of two.", examples=[256])

    @field_validator("npts")
    @classmethod
    def _power_of_two(cls, value: int) -> int:
        if value < 16 or value & (value - 1):
            raise ValueError(f"npts must be a power of two >= 16, got {value}")
        return value

    def build(self) -> PeriodicGrid:
        return PeriodicGrid(d=self.d, npts=self.npts)


ProfileKind = Literal["gaussian", "bump", "cosine", "constant", "random", "zero"]


class ProfileSpec(BaseModel):
    """A spatial profile used as initial data."""

    model_config = ConfigDict(frozen=True)

    kind: ProfileKind = Field(default="gaussian", description="Profile family.", examples=["gaussian"])
    amplitude: float = Field(default=1.0, description="Overall scale.", examples=[1.0])
    width: float = Field(default=0.5, description="Gaussian width.", gt=0.0, examples=[0.5])
    k: int = Field(default=1, description="Mode number of the cosine profile.", ge=0, examples=[1])
    kmax: int | None = Field(default=None, description="Band limit of the random profile.", ge=1)

    def build(self, grid: PeriodicGrid, seed: int) -> SpectralField:
        """Sample the profile; ``seed`` drives the random family only."""
        if self.kind == "gaussian":
            return gaussian_bump(grid, self.width, self.amplitude)
        if self.kind == "bump":
            return positive_bump(grid, self.amplitude)
        if self.kind == "cosine":
            return cosine_mode(grid, self.k, self.amplitude)
        if self.kind == "constant":
            return constant(grid, self.amplitude)
        if self.kind == "random":
            return random_bandlimited(grid, seed=seed, kmax=self.kmax, amplitude=self.amplitude)
        return SpectralField.zeros(grid)


class DataConfig(BaseModel):
    """Initial value and velocity profiles."""

    model_config = ConfigDict(frozen=True)

    psi0: ProfileSpec = Field(default_factory=ProfileSpec, description="Initial value profile.")
    psi1: ProfileSpec = Field(
        default_factory=lambda: ProfileSpec(kind="gaussian", amplitude=0.5),
        description="Initial velocity profile.",
    )


class KernelEvalConfig(BaseModel):
    """Point evaluation of one kernel."""

    model_config = ConfigDict(frozen=True)

    kind: KernelKind = Field(default="E", description="Kernel to evaluate.", examples=["E"])
    r: float = Field(default=0.1, description="Offset r (z for K0/K1).", ge=0.0, examples=[0.1])
    t: float = Field(default=1.0, description="Time t.", gt=0.0, examples=[1.0])
    t0: float = Field(default=0.0, description="Second time (b for dEdt).", ge=0.0, examples=[0.0])


class SolveConfig(BaseModel):
    """Linear and direct solves."""

    model_config = ConfigDict(frozen=True)

    method: Literal["transform", "direct", "both"] = Field(
        default="both", description="Solution path of solve_linear.", examples=["both"]
    )
    times: list[float] = Field(
        default_factory=lambda: [1.0, 2.0, 4.0], description="Comparison times of solve_linear.", examples=[[1.0, 2.0, 4.0]]
    )
    T: float = Field(default=8.0, description="Horizon of solve_direct.", gt=0.0, examples=[8.0])
    n_output: int = Field(default=41, description="Output samples of solve_direct.", ge=2, examples=[41])
    rtol: float = Field(default=1e-10, description="Relative tolerance of the direct solver.", gt=0.0)
    atol: float = Field(default=1e-12, description="Absolute tolerance of the direct solver.", gt=0.0)
    blowup_threshold: float = Field(default=1e8, description="L-infinity blow-up level.", gt=0.0)
    operator: Literal["laplacian", "variable"] = Field(
        default="laplacian", description="Spatial operator.", examples=["laplacian"]
    )
    coeff_amplitude: float = Field(
        default=0.2,
        description="a in c(x) = 1 + a cos x for the variable-coefficient operator.",
        gt=-1.0,
        lt=1.0,
    )
    discrepancy_tol: float = Field(default=1e-3, description="Pass level of the transform/direct discrepancy.", gt=0.0)

    @field_validator("times")
    @classmethod
    def _positive_times(cls, value: list[float]) -> list[float]:
        if not value or any(t <= 0.0 for t in value):
            raise ValueError("times must be a non-empty list of positive values")
        return sorted(value)

    def build_operator(self, grid: PeriodicGrid) -> Operator:
        if self.operator == "laplacian":
            return Laplacian()
        if grid.d != 1:
            raise ConfigurationException("solve.operator=variable needs grid.d = 1")
        return VariableCoefficient1D(1.0 + self.coeff_amplitude * np.cos(grid.axis()))


class LifespanConfig(BaseModel):
    """Lifespan sweep."""

    model_config = ConfigDict(frozen=True)

    eps_grid: list[float] = Field(
        default_factory=lambda: [1e-2, 3e-3, 1e-3, 3e-4, 1e-4],
        description="Data sizes.",
        examples=[[1e-2, 1e-3, 1e-4]],
    )
    solver: Literal["direct", "picard"] = Field(default="direct", description="Solver per point.")
    profile: Profile = Field(default="bump", description="Data profile.")
    T_max: float = Field(default=30.0, description="Horizon; longer lifespans are censored.", gt=0.0)
    threshold: float = Field(default=1e8, description="Blow-up level.", gt=0.0)
    rtol: float = Field(default=1e-8, description="Relative tolerance of the direct solver.", gt=0.0)
    atol: float = Field(default=1e-10, description="Absolute tolerance of the direct solver.", gt=0.0)
    slope_tol: float = Field(default=0.2, description="Allowed relative slope deviation.", gt=0.0)
    shortfall_tol: float = Field(default=0.05, description="Allowed drop below the fitted line.", gt=0.0)
    control: bool = Field(default=True, description="Run the constant-in-space ODE control case.")
    control_tol: float = Field(default=0.01, description="Allowed relative control-case deviation.", gt=0.0)
    allow_hypothesis_violation: bool = Field(default=False, description="Run with Re M <= n/2.")

    @field_validator("eps_grid")
    @classmethod
    def _positive_eps(cls, value: list[float]) -> list[float]:
        if len(value) < 2 or any(e <= 0.0 for e in value):
            raise ValueError("eps_grid needs at least two positive values")
        return value


class DecayCaseSpec(BaseModel):
    """One decay-rate check."""

    model_config = ConfigDict(frozen=True)

    case: DecayCase = Field(description="Estimate under test.", examples=["homogeneous_i"])
    M: float = Field(description="Real curved-mass root; n comes from the model section.", gt=0.0, examples=[0.25])
    tolerance: float = Field(default=0.1, description="Relative tolerance.", gt=0.0, examples=[0.1])


def _default_decay() -> list[DecayCaseSpec]:
    return [
        DecayCaseSpec(case="homogeneous_i", M=0.25, tolerance=0.1),
        DecayCaseSpec(case="homogeneous_ii", M=1.2, tolerance=0.15),
        DecayCaseSpec(case="derivative", M=1.2, tolerance=0.15),
    ]


def _default_bounds() -> list[BoundCheckSpec]:
    return [
        BoundCheckSpec(check="k1_integral", M_grid=[0.3, 1.2]),
        BoundCheckSpec(check="k0_integral", M_grid=[0.3, 1.2]),
        BoundCheckSpec(check="k0_zone_split", M_grid=[0.3, 1.2]),
        BoundCheckSpec(check="dt_kernel_integral", M_grid=[0.3, 2.0]),
    ]


def _default_appendix() -> list[BoundCheckSpec]:
    return [
        BoundCheckSpec(check="hypergeometric_limits", M_grid=[1.5, 0.25, 0.5]),
        BoundCheckSpec(check="three_halves_power"),
        BoundCheckSpec(check="shifted_power", M_grid=[1.0]),
        BoundCheckSpec(check="five_halves_power", M_grid=[2.0]),
        BoundCheckSpec(check="kernel_weighted_power", M_grid=[0.3, 1.2]),
    ]


class VerifyConfig(BaseModel):
    """Verification harness."""

    model_config = ConfigDict(frozen=True)

    decay: list[DecayCaseSpec] = Field(default_factory=_default_decay, description="Decay checks.")
    window: tuple[float, float] = Field(default=(2.0, 8.0), description="Decay fitting window.")
    n_samples: int = Field(default=25, description="Samples in the decay window.", ge=8)
    bounds: list[BoundCheckSpec] = Field(default_factory=_default_bounds, description="Kernel-integral bounds.")
    appendix: list[BoundCheckSpec] = Field(default_factory=_default_appendix, description="Appendix estimates.")
    limit_z: list[float] = Field(
        default_factory=lambda: [1e2, 1e3, 1e4], description="Arguments of the limit checks."
    )
    source_estimate: bool = Field(default=False, description="Also check the inhomogeneous estimate.")

    @field_validator("window")
    @classmethod
    def _ordered(cls, value: tuple[float, float]) -> tuple[float, float]:
        if not 0.0 <= value[0] < value[1]:
            raise ValueError(f"window must satisfy 0 <= t_min < t_max, got {value}")
        return value


class ExperimentConfig(BaseModel):
    """A complete experiment description.

    Only ``model`` is required; every other section has defaults. A Picard
    section without its own ``quad`` inherits the top-level quadrature.
    """

    model_config = ConfigDict(frozen=True)

    model: ModelConfig = Field(description="Model parameters.")
    grid: GridConfig = Field(default_factory=GridConfig, description="Periodic grid.")
    quad: QuadratureSpec = Field(default_factory=QuadratureSpec, description="Transform quadrature.")
    nonlinearity: NonlinearSpec | None = Field(default=None, description="F(psi); none for linear runs.")
    data: DataConfig = Field(default_factory=DataConfig, description="Initial data.")
    kernel: KernelEvalConfig = Field(default_factory=KernelEvalConfig, description="kernel_eval point.")
    solve: SolveConfig = Field(default_factory=SolveConfig, description="Solver settings.")
    picard: PicardConfig | None = Field(default=None, description="Picard iteration of solve_semilinear.")
    lifespan: LifespanConfig = Field(default_factory=LifespanConfig, description="Lifespan sweep.")
    verify: VerifyConfig = Field(default_factory=VerifyConfig, description="Verification harness.")
    run: RunKind = Field(default=RunKind.KERNEL_EVAL, description="Experiment to run.", examples=["verify_appendix"])
    output_dir: str = Field(
        default_factory=lambda: settings.DSKG_OUTPUT_DIR,
        description="Directory receiving CSV, JSON and SVG artifacts.",
        examples=["results"],
    )
    seed: int = Field(default=0, description="Seed of every stochastic choice.", ge=0, examples=[0])

    @model_validator(mode="before")
    @classmethod
    def _inherit_quadrature(cls, data: Any) -> Any:
        if isinstance(data, dict) and isinstance(data.get("picard"), dict) and "quad" not in data["picard"]:
            data = dict(data)
            data["picard"] = {**data["picard"], "quad": data.get("quad", {})}
        return data

    def with_overrides(self, output_dir: str | None = None, seed: int | None = None, run: RunKind | None = None) -> "ExperimentConfig":
        """Copy with command-line overrides applied."""
        update: dict[str, Any] = {}
        if output_dir is not None:
            update["output_dir"] = output_dir
        if seed is not None:
            if seed < 0:
                raise ConfigurationException(f"seed must be non-negative, got {seed}")
            update["seed"] = seed
        if run is not None:
            update["run"] = run
        return self.model_copy(update=update)

    def provenance(self) -> dict[str, Any]:
        """JSON-ready form used for hashing; the output directory is excluded."""
        return self.model_dump(mode="json", exclude={"output_dir"})


def _format_errors(error: ValidationError) -> str:
    lines = []
    for item in error.errors():
        loc = ".".join(str(part) for part in item["loc"]) or "<root>"
        lines.append(f"{loc}: {item['msg']}")
    return "; ".join(lines)


def parse_config(payload: Any) -> ExperimentConfig:
    """Validate an already-decoded configuration document."""
    try:
        return ExperimentConfig.model_validate(payload)
    except ValidationError as e:
        raise ConfigurationException(f"invalid configuration: {_format_errors(e)}") from e


def load_config(path: str | Path) -> ExperimentConfig:
    """Read and validate a JSON experiment configuration.

    Raises:
        ConfigurationException: If the file is missing, is not JSON, or fails
            validation; the message lists each failing field path.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigurationException(f"configuration file not found: {path}")
    try:
        payload = orjson.loads(path.read_bytes())
    except orjson.JSONDecodeError as e:
        raise ConfigurationException(f"configuration file {path} is not valid JSON: {e}") from e
    return parse_config(payload)
