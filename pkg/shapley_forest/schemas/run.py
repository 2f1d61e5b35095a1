from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from shapley_forest.core.config import settings
from shapley_forest.schemas.forest import ForestParams
from shapley_forest.schemas.generator import GeneratorSpec

SCHEMA_VERSION = "1.0"


class Command(str, Enum):
    FIT = "fit"
    SHAPLEY = "shapley"
    EXPERIMENT = "experiment"
    ABLATION = "ablation"
    KSWEEP = "ksweep"


class Sampler(str, Enum):
    PIS = "pis"
    PMC = "pmc"


class Strategy(str, Enum):
    PRF = "prf"
    MARGINAL = "marginal"
    RETRAIN = "retrain"


class DataSource(BaseModel):
    path: Optional[str] = None
    columns: Optional[str] = None
    target: Optional[str] = None
    generator: Optional[GeneratorSpec] = None
    forest_path: Optional[str] = None

    @model_validator(mode="after")
    def check_source(self):
        if (self.path is None) == (self.generator is None):
            raise ValueError("give exactly one of a CSV path or a generator spec")
        if self.path is not None and (self.columns is None or self.target is None):
            raise ValueError("CSV input needs a column schema and a target column")
        return self


class RunConfig(BaseModel):
    command: Command = Command.SHAPLEY
    source: DataSource
    forest: ForestParams = Field(default_factory=ForestParams)
    num_subsets: int = Field(default_factory=lambda: settings.num_subsets, ge=1)
    strategy: Strategy = Strategy.PRF
    marginal_draws: int = Field(default_factory=lambda: settings.marginal_draws, ge=1)
    sampler: Sampler = Sampler.PIS
    repetitions: int = Field(1, ge=1)
    k_list: Optional[List[int]] = None
    output_dir: str = Field(default_factory=lambda: settings.output_dir)
    seed: int = Field(0, ge=0, lt=2**64)
    n_jobs: int = Field(default_factory=lambda: settings.n_jobs, ge=1)
    use_cache: bool = True
    plot: bool = True
    strict_solver: bool = Field(default_factory=lambda: settings.solver_strict)

    @field_validator("k_list")
    @classmethod
    def check_k_list(cls, k_list: Optional[List[int]]) -> Optional[List[int]]:
        if k_list is None:
            return k_list
        if not k_list or any(k < 1 for k in k_list):
            raise ValueError("K list must hold positive counts")
        if any(b <= a for a, b in zip(k_list, k_list[1:])):
            raise ValueError("K list must be strictly ascending")
        return k_list


class RepetitionResult(BaseModel):
    rep: int
    seed: int
    effects: List[float]
    constraint: float
    diagnostics: Dict[str, Any] = Field(default_factory=dict)


class Summary(BaseModel):
    mean: List[float]
    std: List[float]
    ground_truth: Optional[List[float]] = None
    cumulative_error: Optional[float] = None
    ranking: List[int] = Field(default_factory=list)


class RunReport(BaseModel):
    schema_version: str = SCHEMA_VERSION
    config: RunConfig
    variables: List[str]
    repetitions: List[RepetitionResult]
    summary: Summary
    diagnostics: Dict[str, Any] = Field(default_factory=dict)
    timings: Dict[str, float] = Field(default_factory=dict)
    # per-repetition path tables and value estimates, written as CSV and kept out of report.json
    subset_tables: Dict[int, Any] = Field(default_factory=dict, exclude=True)
    value_estimates: Dict[int, Any] = Field(default_factory=dict, exclude=True)

    def effects_matrix(self) -> np.ndarray:
        return np.array([rep.effects for rep in self.repetitions], dtype=float)

    def recompute_cumulative_error(self) -> Optional[float]:
        """Sum over variables of |mean estimate - ground truth|"""
        if self.summary.ground_truth is None:
            return None
        mean = self.effects_matrix().mean(axis=0)
        return float(np.abs(mean - np.asarray(self.summary.ground_truth)).sum())


class AblationCell(BaseModel):
    sampler: Sampler
    strategy: Strategy
    cumulative_error: Optional[float] = None
    errors: List[float] = Field(default_factory=list)
    mean: List[float] = Field(default_factory=list)


class AblationReport(BaseModel):
    schema_version: str = SCHEMA_VERSION
    config: RunConfig
    variables: List[str]
    ground_truth: Optional[List[float]] = None
    cells: List[AblationCell]
    timings: Dict[str, float] = Field(default_factory=dict)


class KSweepRow(BaseModel):
    num_subsets: int
    mean_error: float
    std_error: float
    errors: List[float] = Field(default_factory=list)


class KSweepReport(BaseModel):
    schema_version: str = SCHEMA_VERSION
    config: RunConfig
    rows: List[KSweepRow]
    spearman: Optional[float] = None
    adjacent_decreases: int = 0
    timings: Dict[str, float] = Field(default_factory=dict)
