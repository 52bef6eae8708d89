from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, field_validator, model_validator

from tabsynth.models import ColumnKind, LearnerKind, Method, TaskKind

REPORT_SCHEMA_VERSION = 1


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


# ---------------------------------------------------------------------------
# Metadata sidecar
# ---------------------------------------------------------------------------

class ColumnSpec(_Strict):
    name: str
    kind: ColumnKind


class DatasetMeta(_Strict):
    task: TaskKind
    columns: list[ColumnSpec]
    split_column: str | None = None
    split_seed: int = 0

    @model_validator(mode="after")
    def _check_columns(self) -> "DatasetMeta":
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise ValueError("column names must be unique")
        targets = [c for c in self.columns if c.kind is ColumnKind.TARGET]
        if len(targets) != 1:
            raise ValueError("exactly one column must have kind 'target'")
        if self.split_column is not None and self.split_column in names:
            raise ValueError("split_column must not also be declared as a feature column")
        return self

    @property
    def target(self) -> str:
        return next(c.name for c in self.columns if c.kind is ColumnKind.TARGET)

    def names(self, kind: ColumnKind) -> list[str]:
        return [c.name for c in self.columns if c.kind is kind]


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------

class TrainConfig(_Strict):
    learning_rate: PositiveFloat = 0.001
    lr_anneal: bool = True
    batch_size: PositiveInt = 256
    timesteps: PositiveInt = 1000
    iterations: PositiveInt = 10000
    num_layers: PositiveInt = 4
    layer_width: PositiveInt = 256
    sample_proportion: PositiveFloat = 1.0
    seed: int = Field(default=0, ge=0, lt=2**64)

    @field_validator("num_layers")
    @classmethod
    def _layers_in_search_space(cls, v: int) -> int:
        if v not in (2, 4, 6, 8):
            raise ValueError("num_layers must be one of 2, 4, 6, 8")
        return v


class SmoteConfig(_Strict):
    k_neighbours: PositiveInt = 5
    lambda_range: tuple[float, float] = (0.0, 1.0)
    sample_proportion: PositiveFloat = 1.0
    seed: int = Field(default=0, ge=0, lt=2**64)

    @field_validator("lambda_range")
    @classmethod
    def _ordered_unit_range(cls, v: tuple[float, float]) -> tuple[float, float]:
        lo, hi = v
        if not 0.0 <= lo <= hi <= 1.0:
            raise ValueError("lambda_range must satisfy 0 <= lo <= hi <= 1")
        return v


class EvalOptions(_Strict):
    learners: list[LearnerKind] | None = None
    seeds: PositiveInt = 1
    histogram_bins: int = Field(default=20, ge=2)


class DataPaths(_Strict):
    path: Path
    meta: Path


class RunConfig(_Strict):
    data: DataPaths | None = None
    train: TrainConfig = TrainConfig()
    smote: SmoteConfig = SmoteConfig()
    eval: EvalOptions = EvalOptions()


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

class HistogramData(BaseModel):
    kind: ColumnKind
    edges: list[float] | None = None
    categories: list[str] | None = None
    real: list[int]
    synthetic: list[int]


class CorrelationDiff(BaseModel):
    columns: list[str]
    values: list[list[float]]
    constant_columns: list[str] = []


class EvalReport(BaseModel):
    schema_version: int = REPORT_SCHEMA_VERSION
    task: TaskKind
    seeds: int
    efficiency: dict[str, float]
    efficiency_std: dict[str, float]
    dcr: float
    dcr_p05: float
    dcr_p95: float
    exact_copy_rate: float
    dcr_histogram: HistogramData
    corr_diff: CorrelationDiff
    histograms: dict[str, HistogramData]


class CompareRow(BaseModel):
    method: Method
    efficiency: dict[str, float]
    dcr: float


class CompareReport(BaseModel):
    schema_version: int = REPORT_SCHEMA_VERSION
    rows: list[CompareRow]
