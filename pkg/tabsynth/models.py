"""Enums shared across the application."""

import enum


class TaskKind(str, enum.Enum):
    BINCLASS = "binclass"
    MULTICLASS = "multiclass"
    REGRESSION = "regression"

    @property
    def is_classification(self) -> bool:
        return self is not TaskKind.REGRESSION


class ColumnKind(str, enum.Enum):
    NUMERICAL = "numerical"
    CATEGORICAL = "categorical"
    TARGET = "target"


class Split(str, enum.Enum):
    TRAIN = "train"
    VALIDATION = "validation"
    TEST = "test"


class LearnerKind(str, enum.Enum):
    LOGISTIC = "logistic-regression"
    RIDGE = "ridge-regression"
    MLP = "small-mlp"


class Method(str, enum.Enum):
    TABDDPM = "tabddpm"
    SMOTE = "smote"
