from datetime import date
from enum import Enum
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from config.config_manager import ConfigurationManager
from errors import UsageError


class PipelineStep(Enum):
    DICT_BUILD = "dict-build"
    SYNTH_GEN = "synth-gen"
    INGEST = "ingest"
    FIT = "fit"
    PREDICT = "predict"
    VACCINE_ANALYZE = "vaccine-analyze"
    REPORT = "report"


class RunConfig(BaseModel):
    """Resolved settings of one run: JSON configuration overlaid with CLI overrides"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    # epidemic
    step_days: float = Field(0.05, gt=0, le=1)
    horizon_days: int = Field(730, ge=1)
    undershoot_tolerance: float = Field(1e-9, ge=0)
    early_stop_fraction: float = Field(1e-9, ge=0)

    # dictionary
    grid_points: int = Field(10, ge=2)
    modes: List[str] = ["P2P", "CS"]
    susceptible_at_start: float = Field(10_000_000, gt=0)
    min_template_total: float = Field(1.0, ge=0)
    min_template_spread: float = Field(1e-3, ge=0)

    # fitting and prediction
    fit_window_days: int = Field(30, ge=4)
    tau_max: int = Field(25, ge=0)
    min_overlap: int = Field(3, ge=2)
    offset_mode: Literal["once", "per_day"] = "once"
    min_window_days: int = Field(5, ge=2)

    # vaccination analysis
    termination_fraction: float = Field(0.99, gt=0, lt=1)
    quiet_days: int = Field(14, ge=0)
    split_threshold: float = Field(0.6, gt=0, lt=1)
    cv_folds: int = Field(10, ge=2)
    tree_max_depth: int = Field(4, ge=1)
    tree_min_leaf: int = Field(5, ge=1)
    importance_repeats: int = Field(20, ge=1)
    cox_max_iter: int = Field(100, ge=1)
    cox_tolerance: float = Field(1e-8, gt=0)
    min_samples: int = Field(20, ge=2)

    # telemetry
    min_machines: int = Field(200, ge=1)
    max_reject_fraction: float = Field(0.10, ge=0, le=1)
    chunk_rows: int = Field(200_000, ge=1)
    start_date: date = date(2019, 1, 1)
    observation_end: Optional[date] = None

    # run
    seed: int = 20190101
    jobs: int = Field(1, ge=1)

    @field_validator("modes")
    @classmethod
    def _known_modes(cls, modes: List[str]) -> List[str]:
        if not modes or not set(modes) <= {"P2P", "CS"}:
            raise ValueError("modes must be a non-empty subset of P2P, CS")
        return modes

    @classmethod
    def resolve(cls, config_manager: ConfigurationManager,
                overrides: Optional[Dict[str, Any]] = None) -> "RunConfig":
        """Defaults from the JSON files, then any non-None override"""
        values = config_manager.flat_pipeline_defaults()
        values.update({k: v for k, v in (overrides or {}).items() if v is not None})
        try:
            return cls(**values)
        except ValidationError as e:
            problems = "; ".join(f"{'.'.join(map(str, err['loc']))}: {err['msg']}" for err in e.errors())
            raise UsageError(f"invalid configuration: {problems}") from e

    def echo(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")
