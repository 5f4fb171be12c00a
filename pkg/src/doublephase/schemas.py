"""Pydantic request and response models for the service and CLI.

A single :class:`RunConfig` document drives every subcommand; unknown keys are
rejected so experiment files stay machine-checkable.
"""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator


class GridConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dimension: Literal[1, 2]
    extents: list[tuple[float, float]]
    nodes_per_axis: list[int]

    @model_validator(mode="after")
    def _check_axes(self):
        if len(self.extents) != self.dimension or len(self.nodes_per_axis) != self.dimension:
            raise ValueError("extents and nodes_per_axis need one entry per axis")
        return self


class ExponentsConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    p: float
    q: float
    strict: bool = False
    ambient_dim: int | None = None  # defaults to the grid dimension


class WeightConfig(BaseModel):
    """Either a named analytic family sampled on the grid or a nodal-values file."""

    model_config = ConfigDict(extra="forbid")

    family: Literal["constant", "linear", "distance", "power"] | None = None
    value: float = 1.0  # constant family
    alpha: float | None = None  # power family
    file: str | None = None

    @model_validator(mode="after")
    def _check_source(self):
        if (self.family is None) == (self.file is None):
            raise ValueError("weight needs exactly one of 'family' or 'file'")
        if self.family == "power" and self.alpha is None:
            raise ValueError("power weight family requires alpha")
        return self


class SweepConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    start: float = Field(alias="from")
    stop: float = Field(alias="to")
    steps: int
    spacing: Literal["linear", "relative"] = "relative"

    @model_validator(mode="after")
    def _check_range(self):
        if not self.start < self.stop:
            raise ValueError("sweep needs from < to")
        if self.steps < 1:
            raise ValueError("sweep needs steps >= 1")
        return self


class SolverConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    tol: float = 1e-7
    max_iters: int = 5000
    eig_tol: float = 1e-8
    eig_max_iters: int = 20000
    epsilon_reg: float | None = None  # None -> diameter-scaled default
    multistarts: int = 1
    rng_seed: int = 0
    trials: int = 200  # property-suite trial count

    @model_validator(mode="after")
    def _check_positive(self):
        if self.tol <= 0 or self.eig_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iters < 1 or self.eig_max_iters < 1:
            raise ValueError("iteration budgets must be positive")
        if self.multistarts < 1:
            raise ValueError("multistarts must be >= 1")
        if self.epsilon_reg is not None and self.epsilon_reg < 0:
            raise ValueError("epsilon_reg must be nonnegative")
        return self


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    grid: GridConfig
    exponents: ExponentsConfig
    weight: WeightConfig = WeightConfig(family="constant")
    lambda_value: float | None = Field(default=None, alias="lambda")
    sweep: SweepConfig | None = None
    solver: SolverConfig = SolverConfig()
    out_dir: str | None = None


# ---------------------------------------------------------------------------
# responses


class EigReport(BaseModel):
    model_config = ConfigDict(extra="forbid")

    status: Literal["ok", "nonconverged"]
    lambda_hat1: float
    residual: float
    iterations: int
    grid: GridConfig
    exponents: ExponentsConfig
    eigenfunction: list[float]
    warnings: list[str] = []


class SolveReport(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    status: Literal["ok", "infeasible", "nonconverged"]
    lam: float = Field(alias="lambda")
    lambda_hat1: float
    feasible: bool
    m_lambda: float | None = None
    residual: float | None = None
    min_u: float | None = None
    max_u: float | None = None
    sup_u: float | None = None
    iterations: int | None = None
    eigenfunction: list[float] | None = None
    warnings: list[str] = []


class SweepRowModel(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    lam: float = Field(alias="lambda")
    feasible: bool
    m_lambda: float | None = None
    residual: float | None = None
    min_u: float | None = None
    max_u: float | None = None
    iters: int


class SweepReport(BaseModel):
    model_config = ConfigDict(extra="forbid")

    status: Literal["ok"]
    lambda_hat1: float
    rows: list[SweepRowModel]
    csv: str
    warnings: list[str] = []


class PropertyResult(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    trials: int
    failures: int
    worst_slack: float
    tolerance: float


class PropsReport(BaseModel):
    model_config = ConfigDict(extra="forbid")

    status: Literal["ok", "failed"]
    properties: list[PropertyResult]
    first_failure: str | None = None
    warnings: list[str] = []
