"""Request and response models for the HTTP service (and the thin CLI client)."""

from __future__ import annotations

import math
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..experiments import (CONFIG_FORMAT, ExperimentConfig, McResult,
                           Seeds, SweepResult, WindowAverage)


class SeedsModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    couplings: int = 1
    state: int = 2
    swb_env: int = 3
    swb_se: int = 4
    random_bonds: int = 5

    def to_core(self) -> Seeds:
        return Seeds(**self.model_dump())


class ConfigModel(BaseModel):
    """Mirrors ExperimentConfig; unknown keys are rejected."""

    model_config = ConfigDict(extra="forbid")

    format: Literal["spin-experiment/1"] = CONFIG_FORMAT
    n_env: int = Field(ge=1)
    case: Literal["I", "II"] = "I"
    n_system: int = Field(default=4, ge=1)
    j_system: float = -0.15
    omega_max: float = Field(default=0.2, gt=0)
    delta_max: float = Field(default=0.2, gt=0)
    seeds: SeedsModel = SeedsModel()
    swb_env_count: int = Field(default=0, ge=0)
    swb_se_count: int = Field(default=0, ge=0)
    k_max: int = Field(default=1, ge=1)
    all_to_all_env: bool = False
    random_bond_count: int = Field(default=0, ge=0)
    initial_state: Literal["X", "UDUDY"] = "X"
    tau: float = Field(default=math.pi, gt=0)
    t_max: Optional[float] = Field(default=None, gt=0)
    t_avg_start: Optional[float] = None
    output_dir: str = "runs/run"
    max_sites: int = Field(default=24, ge=2)

    @model_validator(mode="after")
    def _window_ordered(self):
        # Full cross-field validation happens in the core dataclass.
        self.to_core()
        return self

    def to_core(self) -> ExperimentConfig:
        doc = self.model_dump(exclude={"format"})
        doc["seeds"] = Seeds(**doc["seeds"])
        return ExperimentConfig(**doc)


class PredictRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    d_system: int = Field(ge=2)
    d_env: int = Field(ge=1)


class PredictResponse(BaseModel):
    d_system: int
    d_env: int
    sigma_expected: float
    sigma_isolated: float
    delta_expected: float


class McRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    d_system: int = Field(ge=2)
    d_env: Optional[int] = Field(default=None, ge=1)
    samples: int = Field(default=10000, ge=100)
    seed: int = 0


class McResponse(BaseModel):
    d_system: int
    d_env: Optional[int]
    samples: int
    mean_two_sigma_sq: float
    se_two_sigma_sq: float
    expected_two_sigma_sq: float
    mean_delta_sq: float
    se_delta_sq: float
    expected_delta_sq: float

    @classmethod
    def from_core(cls, r: McResult) -> "McResponse":
        return cls(**r.__dict__)


class EvolveRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: ConfigModel


class TrackRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: ConfigModel


class RunSummary(BaseModel):
    csv_path: str
    model_path: str
    manifest_path: str
    n_records: int
    window_start: float
    window_end: float
    sigma_bar: float
    delta_bar: float
    b_bar: float

    @classmethod
    def build(cls, result, window: tuple[float, float],
              avg: WindowAverage) -> "RunSummary":
        return cls(
            csv_path=str(result.csv_path),
            model_path=str(result.model_path),
            manifest_path=str(result.manifest_path),
            n_records=len(result.records),
            window_start=window[0],
            window_end=window[1],
            sigma_bar=avg.sigma,
            delta_bar=avg.delta_uniform,
            b_bar=avg.b_fitted,
        )


class SweepRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: ConfigModel
    n_env_list: list[int] = Field(min_length=1)
    workers: int = Field(default=1, ge=1)


class SweepRowModel(BaseModel):
    n_env: int
    sigma_bar: float
    sigma_pred: float
    ratio: float
    delta_bar: float
    delta_pred: float


class SweepResponse(BaseModel):
    rows: list[SweepRowModel]
    slope_ln_sigma: float
    slope_ln_delta: float
    csv_path: str

    @classmethod
    def from_core(cls, r: SweepResult) -> "SweepResponse":
        return cls(rows=[SweepRowModel(**row.__dict__) for row in r.rows],
                   slope_ln_sigma=r.slope_ln_sigma,
                   slope_ln_delta=r.slope_ln_delta,
                   csv_path=str(r.csv_path))


class HealthResponse(BaseModel):
    status: str
    version: str


class JobTicket(BaseModel):
    job_id: str


class JobStatus(BaseModel):
    job_id: str
    kind: str
    status: Literal["queued", "running", "done", "error"]
    result: Optional[dict] = None
    error: Optional[str] = None
