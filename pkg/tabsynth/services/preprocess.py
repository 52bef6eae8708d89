"""Dataset model, Gaussian quantile transform, one-hot encoding and CSV ingestion."""

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.stats import norm

from tabsynth.errors import DataError, StateError
from tabsynth.models import ColumnKind, Split, TaskKind
from tabsynth.schemas import DatasetMeta
from tabsynth.services.multinomial import CategoricalFeatureSpec, feature_specs, onehot

log = logging.getLogger("tabsynth")

MAX_QUANTILES = 1000
CDF_CLIP = 1e-7
SPLIT_FRACTIONS = (0.8, 0.1, 0.1)
# |z| of the clipped CDF ends; every encoded numeric lies within it.
ENCODED_BOUND = float(norm.ppf(1.0 - CDF_CLIP))


# ---------------------------------------------------------------------------
# Dataset
# ---------------------------------------------------------------------------

@dataclass
class TabularDataset:
    numerical: np.ndarray                 # (n, N_num) float64, original units
    numerical_names: list[str]
    categorical: np.ndarray               # (n, C) int64 codes
    categorical_names: list[str]
    vocabularies: list[list[str]]         # code -> label per categorical column
    target: np.ndarray                    # float64 (regression) or int64 codes
    target_name: str
    task: TaskKind
    split: np.ndarray                     # (n,) Split values as str
    target_vocabulary: list[str] | None = None
    header: list[str] = field(default_factory=list)
    split_column: str | None = None

    def __post_init__(self):
        n = len(self.target)
        if self.numerical.shape[0] != n or self.categorical.shape[0] != n or len(self.split) != n:
            raise DataError("dataset blocks have inconsistent row counts")
        for j, vocab in enumerate(self.vocabularies):
            if n and self.categorical[:, j].max(initial=0) >= len(vocab):
                raise DataError(f"column '{self.categorical_names[j]}' has codes outside its vocabulary")
        if not self.header:
            self.header = self.numerical_names + self.categorical_names + [self.target_name]

    def __len__(self) -> int:
        return len(self.target)

    @property
    def cardinalities(self) -> list[int]:
        return [len(v) for v in self.vocabularies]

    @property
    def num_classes(self) -> int:
        return len(self.target_vocabulary) if self.task.is_classification else 0

    def take(self, rows: np.ndarray) -> "TabularDataset":
        rows = np.asarray(rows)
        return replace(
            self,
            numerical=self.numerical[rows],
            categorical=self.categorical[rows],
            target=self.target[rows],
            split=self.split[rows],
        )

    def split_view(self, which: Split) -> "TabularDataset":
        return self.take(np.flatnonzero(self.split == which.value))

    def class_counts(self) -> dict[int, int]:
        if not self.task.is_classification:
            return {}
        counts = np.bincount(self.target.astype(np.int64), minlength=self.num_classes)
        return {c: int(n) for c, n in enumerate(counts)}

    def to_frame(self) -> pd.DataFrame:
        columns: dict[str, object] = {}
        for j, name in enumerate(self.numerical_names):
            columns[name] = self.numerical[:, j]
        for j, name in enumerate(self.categorical_names):
            columns[name] = np.asarray(self.vocabularies[j], dtype=object)[self.categorical[:, j]]
        if self.task.is_classification:
            columns[self.target_name] = np.asarray(self.target_vocabulary, dtype=object)[
                self.target.astype(np.int64)
            ]
        else:
            columns[self.target_name] = self.target
        if self.split_column is not None:
            columns[self.split_column] = self.split
        return pd.DataFrame({name: columns[name] for name in self.header})


# ---------------------------------------------------------------------------
# Quantile transform
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuantileTransform:
    quantiles: np.ndarray     # non-decreasing reference values
    references: np.ndarray    # matching CDF levels in [0, 1]

    @property
    def is_constant(self) -> bool:
        return bool(self.quantiles[0] == self.quantiles[-1])

    def transform(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.is_constant:
            return np.zeros_like(x)
        q, r = self.quantiles, self.references
        # Average of the ascending and descending interpolation handles repeated landmarks.
        u = 0.5 * (np.interp(x, q, r) - np.interp(-x, -q[::-1], -r[::-1]))
        return norm.ppf(np.clip(u, CDF_CLIP, 1.0 - CDF_CLIP))

    def inverse(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        if self.is_constant:
            return np.full_like(z, self.quantiles[0])
        u = norm.cdf(z)
        x = np.interp(u, self.references, self.quantiles)
        x = np.where(u <= CDF_CLIP * (1 + 1e-6), self.quantiles[0], x)
        return np.where(u >= 1.0 - CDF_CLIP * (1 + 1e-6), self.quantiles[-1], x)

    def to_state(self) -> dict:
        return {"quantiles": self.quantiles.tolist(), "references": self.references.tolist()}

    @classmethod
    def from_state(cls, state: dict) -> "QuantileTransform":
        return cls(np.asarray(state["quantiles"], dtype=np.float64),
                   np.asarray(state["references"], dtype=np.float64))


def fit_quantile(values) -> QuantileTransform:
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise ValueError("cannot fit a quantile transform on an empty column")
    n_quantiles = min(MAX_QUANTILES, values.size)
    references = np.linspace(0.0, 1.0, n_quantiles)
    quantiles = np.maximum.accumulate(np.quantile(values, references))
    return QuantileTransform(quantiles=quantiles, references=references)


def inverse_quantile(transform: QuantileTransform, z) -> np.ndarray:
    return transform.inverse(z)


# ---------------------------------------------------------------------------
# Encoder
# ---------------------------------------------------------------------------

@dataclass
class EncodedBatch:
    x: np.ndarray                 # (rows, N_num + ΣK_i)
    y: np.ndarray | None          # class labels when conditional


class TabularEncoder:
    """Maps datasets to [quantile numerics | one-hots] and back.

    The regression target is appended to the numerical block; classification
    targets travel separately as class labels.
    """

    def __init__(self):
        self.transforms: list[QuantileTransform] | None = None
        self.task: TaskKind | None = None
        self.numerical_names: list[str] = []
        self.categorical_names: list[str] = []
        self.vocabularies: list[list[str]] = []
        self.target_name: str = ""
        self.target_vocabulary: list[str] | None = None
        self.header: list[str] = []
        self.split_column: str | None = None
        self.class_counts: dict[int, int] = {}
        self.train_size: int = 0

    # -- fitting ----------------------------------------------------------

    def fit(self, dataset: TabularDataset) -> "TabularEncoder":
        train = dataset.split_view(Split.TRAIN)
        if len(train) == 0:
            raise DataError("the training split is empty")
        self.task = dataset.task
        self.numerical_names = list(dataset.numerical_names)
        self.categorical_names = list(dataset.categorical_names)
        self.vocabularies = [list(v) for v in dataset.vocabularies]
        self.target_name = dataset.target_name
        self.target_vocabulary = list(dataset.target_vocabulary) if dataset.target_vocabulary else None
        self.header = list(dataset.header)
        self.split_column = dataset.split_column
        self.class_counts = train.class_counts()
        self.train_size = len(train)

        self.transforms = [fit_quantile(train.numerical[:, j]) for j in range(train.numerical.shape[1])]
        if self.task is TaskKind.REGRESSION:
            self.transforms.append(fit_quantile(train.target))
        for name, qt in zip(self._numeric_block_names, self.transforms):
            if qt.is_constant:
                log.warning("Column '%s' is constant on the training split; it encodes to 0", name)
        return self

    def _check_fitted(self) -> None:
        if self.transforms is None:
            raise StateError("encoder is not fitted")

    @property
    def _numeric_block_names(self) -> list[str]:
        names = list(self.numerical_names)
        if self.task is TaskKind.REGRESSION:
            names.append(self.target_name)
        return names

    @property
    def num_numerical(self) -> int:
        """N_num, including the regression target."""
        self._check_fitted()
        return len(self.transforms)

    @property
    def cardinalities(self) -> list[int]:
        return [len(v) for v in self.vocabularies]

    @property
    def specs(self) -> list[CategoricalFeatureSpec]:
        return feature_specs(self.num_numerical, self.cardinalities)

    @property
    def width(self) -> int:
        return self.num_numerical + sum(self.cardinalities)

    @property
    def num_classes(self) -> int:
        return len(self.target_vocabulary) if self.task.is_classification else 0

    def check_schema(self, dataset: TabularDataset) -> None:
        if (dataset.task is not self.task
                or dataset.numerical_names != self.numerical_names
                or dataset.categorical_names != self.categorical_names
                or dataset.target_name != self.target_name):
            raise DataError("dataset columns do not match the fitted schema")
        if dataset.vocabularies != self.vocabularies or (
            self.task.is_classification and dataset.target_vocabulary != self.target_vocabulary
        ):
            raise DataError("dataset category vocabularies do not match the fitted schema")

    # -- encode / decode --------------------------------------------------

    def numeric_block(self, dataset: TabularDataset) -> np.ndarray:
        self._check_fitted()
        cols = [dataset.numerical[:, j] for j in range(dataset.numerical.shape[1])]
        if self.task is TaskKind.REGRESSION:
            cols.append(dataset.target)
        out = np.empty((len(dataset), len(cols)), dtype=np.float64)
        for j, (col, qt) in enumerate(zip(cols, self.transforms)):
            out[:, j] = qt.transform(col)
        return out

    def onehot_block(self, dataset: TabularDataset) -> np.ndarray:
        blocks = []
        for j, K in enumerate(self.cardinalities):
            codes = dataset.categorical[:, j]
            if codes.size and (codes.min() < 0 or codes.max() >= K):
                raise DataError(f"unknown category in column '{self.categorical_names[j]}'")
            blocks.append(onehot(codes, K))
        return np.concatenate(blocks, axis=1) if blocks else np.zeros((len(dataset), 0))

    def encode(self, dataset: TabularDataset) -> EncodedBatch:
        self.check_schema(dataset)
        x = np.concatenate([self.numeric_block(dataset), self.onehot_block(dataset)], axis=1)
        y = dataset.target.astype(np.int64) if self.task.is_classification else None
        return EncodedBatch(x=x, y=y)

    def decode(self, x: np.ndarray, y: np.ndarray | None = None) -> TabularDataset:
        self._check_fitted()
        x = np.asarray(x, dtype=np.float64)
        n = x.shape[0]
        values = np.empty((n, self.num_numerical), dtype=np.float64)
        for j, qt in enumerate(self.transforms):
            values[:, j] = qt.inverse(x[:, j])
        codes = np.empty((n, len(self.cardinalities)), dtype=np.int64)
        for j, spec in enumerate(self.specs):
            codes[:, j] = np.argmax(x[:, spec.index_range], axis=1)

        if self.task is TaskKind.REGRESSION:
            numerical, target = values[:, :-1], values[:, -1]
        else:
            if y is None:
                raise ValueError("class labels are required to decode a classification dataset")
            numerical, target = values, np.asarray(y, dtype=np.int64)
        return TabularDataset(
            numerical=numerical,
            numerical_names=list(self.numerical_names),
            categorical=codes,
            categorical_names=list(self.categorical_names),
            vocabularies=[list(v) for v in self.vocabularies],
            target=target,
            target_name=self.target_name,
            task=self.task,
            split=np.full(n, Split.TRAIN.value, dtype=object),
            target_vocabulary=list(self.target_vocabulary) if self.target_vocabulary else None,
            header=list(self.header),
            split_column=self.split_column,
        )

    def encode_row(self, numerical, categorical, target) -> np.ndarray:
        row = TabularDataset(
            numerical=np.asarray(numerical, dtype=np.float64).reshape(1, -1),
            numerical_names=list(self.numerical_names),
            categorical=np.asarray(categorical, dtype=np.int64).reshape(1, -1),
            categorical_names=list(self.categorical_names),
            vocabularies=self.vocabularies,
            target=np.asarray([target]),
            target_name=self.target_name,
            task=self.task,
            split=np.asarray([Split.TRAIN.value], dtype=object),
            target_vocabulary=self.target_vocabulary,
        )
        return self.encode(row).x[0]

    def decode_row(self, vector: np.ndarray, y: int | None = None) -> tuple[np.ndarray, np.ndarray, float]:
        ds = self.decode(np.asarray(vector).reshape(1, -1), None if y is None else np.asarray([y]))
        return ds.numerical[0], ds.categorical[0], ds.target[0]

    # -- derived feature spaces --------------------------------------------

    def learner_features(self, dataset: TabularDataset) -> np.ndarray:
        """Quantile numerics (target excluded) and one-hot categoricals."""
        self.check_schema(dataset)
        numeric = self.numeric_block(dataset)
        if self.task is TaskKind.REGRESSION:
            numeric = numeric[:, :-1]
        return np.concatenate([numeric, self.onehot_block(dataset)], axis=1)

    def privacy_space(self, dataset: TabularDataset) -> np.ndarray:
        """Whole records with quantile numerics and one-hot/√2 categoricals.

        Two records that differ in one category are at distance 1 along it.
        """
        self.check_schema(dataset)
        blocks = [self.numeric_block(dataset), self.onehot_block(dataset) / np.sqrt(2.0)]
        if self.task.is_classification:
            blocks.append(onehot(dataset.target.astype(np.int64), self.num_classes) / np.sqrt(2.0))
        return np.concatenate(blocks, axis=1)

    # -- persistence --------------------------------------------------------

    def to_state(self) -> dict:
        self._check_fitted()
        return {
            "task": self.task.value,
            "numerical_names": self.numerical_names,
            "categorical_names": self.categorical_names,
            "vocabularies": self.vocabularies,
            "target_name": self.target_name,
            "target_vocabulary": self.target_vocabulary,
            "header": self.header,
            "split_column": self.split_column,
            "class_counts": {str(k): v for k, v in self.class_counts.items()},
            "train_size": self.train_size,
            "transforms": [qt.to_state() for qt in self.transforms],
        }

    @classmethod
    def from_state(cls, state: dict) -> "TabularEncoder":
        enc = cls()
        enc.task = TaskKind(state["task"])
        enc.numerical_names = list(state["numerical_names"])
        enc.categorical_names = list(state["categorical_names"])
        enc.vocabularies = [list(v) for v in state["vocabularies"]]
        enc.target_name = state["target_name"]
        enc.target_vocabulary = state["target_vocabulary"]
        enc.header = list(state["header"])
        enc.split_column = state["split_column"]
        enc.class_counts = {int(k): int(v) for k, v in state["class_counts"].items()}
        enc.train_size = int(state["train_size"])
        enc.transforms = [QuantileTransform.from_state(s) for s in state["transforms"]]
        return enc


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------

def _line(row: int) -> int:
    # header is line 1
    return row + 2


def _parse_numeric(frame: pd.DataFrame, name: str) -> np.ndarray:
    parsed = pd.to_numeric(frame[name], errors="coerce").to_numpy(dtype=np.float64)
    bad = np.flatnonzero(~np.isfinite(parsed))
    if bad.size:
        row = int(bad[0])
        raise DataError(
            f"type mismatch at line {_line(row)}, column '{name}': "
            f"{frame[name].iloc[row]!r} is not a finite number"
        )
    return parsed


def _encode_labels(values: pd.Series, vocabulary: list[str] | None, name: str) -> tuple[np.ndarray, list[str]]:
    if vocabulary is None:
        vocabulary = sorted(values.unique().tolist())
    index = {label: code for code, label in enumerate(vocabulary)}
    codes = values.map(index)
    unknown = codes.isna().to_numpy()
    if unknown.any():
        row = int(np.flatnonzero(unknown)[0])
        raise DataError(f"unknown category {values.iloc[row]!r} at line {_line(row)}, column '{name}'")
    return codes.to_numpy(dtype=np.int64), list(vocabulary)


def assign_split(n: int, seed: int) -> np.ndarray:
    """Seeded 80/10/10 train/validation/test assignment."""
    order = np.random.default_rng(seed).permutation(n)
    n_train = int(round(SPLIT_FRACTIONS[0] * n))
    n_val = int(round(SPLIT_FRACTIONS[1] * n))
    split = np.empty(n, dtype=object)
    split[order[:n_train]] = Split.TRAIN.value
    split[order[n_train:n_train + n_val]] = Split.VALIDATION.value
    split[order[n_train + n_val:]] = Split.TEST.value
    return split


def load_csv(
    path: Path,
    meta: DatasetMeta,
    reference: TabularDataset | None = None,
    force_split: Split | None = None,
) -> TabularDataset:
    """Read a CSV into a typed dataset.

    *reference* fixes the category vocabularies (e.g. when loading synthetic
    data against the real schema); *force_split* tags every row with one split.
    """
    try:
        frame = pd.read_csv(path, dtype=str, encoding="utf-8", skipinitialspace=False)
    except (pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot parse {path}: {exc}") from exc
    except pd.errors.EmptyDataError as exc:
        raise DataError(f"{path} is empty") from exc
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc

    expected = [c.name for c in meta.columns]
    if meta.split_column is not None and force_split is None:
        expected = expected + [meta.split_column]
    missing = [c for c in expected if c not in frame.columns]
    if missing:
        raise DataError(f"{path}: missing columns {missing}")
    allowed = set(expected) | ({meta.split_column} if meta.split_column else set())
    unknown = [c for c in frame.columns if c not in allowed]
    if unknown:
        raise DataError(f"{path}: columns {unknown} are not declared in the metadata")

    na = frame[expected].isna().to_numpy()
    if na.any():
        rows, cols = np.nonzero(na)
        where = ", ".join(
            f"line {_line(int(r))} column '{expected[int(c)]}'" for r, c in list(zip(rows, cols))[:5]
        )
        raise DataError(f"{path}: {int(na.sum())} missing value(s): {where}")

    numerical_names = meta.names(ColumnKind.NUMERICAL)
    categorical_names = meta.names(ColumnKind.CATEGORICAL)
    target_name = meta.target

    numerical = np.column_stack(
        [_parse_numeric(frame, name) for name in numerical_names]
    ) if numerical_names else np.zeros((len(frame), 0))

    codes, vocabularies = [], []
    for j, name in enumerate(categorical_names):
        vocab = reference.vocabularies[j] if reference is not None else None
        c, v = _encode_labels(frame[name], vocab, name)
        codes.append(c)
        vocabularies.append(v)
    categorical = np.column_stack(codes) if codes else np.zeros((len(frame), 0), dtype=np.int64)

    if meta.task.is_classification:
        vocab = reference.target_vocabulary if reference is not None else None
        target, target_vocabulary = _encode_labels(frame[target_name], vocab, target_name)
        if reference is None and len(target_vocabulary) < 2:
            raise DataError(f"target '{target_name}' has fewer than two classes")
    else:
        target, target_vocabulary = _parse_numeric(frame, target_name), None

    if force_split is not None:
        split = np.full(len(frame), force_split.value, dtype=object)
    elif meta.split_column is not None:
        split = frame[meta.split_column].to_numpy(dtype=object)
        valid = {s.value for s in Split}
        bad = [i for i, s in enumerate(split) if s not in valid]
        if bad:
            raise DataError(
                f"invalid split tag {split[bad[0]]!r} at line {_line(bad[0])}; expected one of {sorted(valid)}"
            )
    else:
        split = assign_split(len(frame), meta.split_seed)

    header = [c for c in frame.columns if c != meta.split_column or force_split is None]
    log.info(
        "Loaded %s: %d rows, %d numerical, %d categorical, task=%s",
        path, len(frame), len(numerical_names), len(categorical_names), meta.task.value,
    )
    return TabularDataset(
        numerical=numerical,
        numerical_names=numerical_names,
        categorical=categorical,
        categorical_names=categorical_names,
        vocabularies=vocabularies,
        target=target,
        target_name=target_name,
        task=meta.task,
        split=split,
        target_vocabulary=target_vocabulary,
        header=header,
        split_column=meta.split_column if force_split is None else None,
    )
