"""Scores and statistics used by the evaluation suite."""

import logging
from typing import NamedTuple

import numpy as np
from scipy.spatial.distance import cdist
from scipy.stats import entropy
from scipy.stats.contingency import crosstab

from tabsynth.config import settings
from tabsynth.errors import UndefinedScoreError
from tabsynth.models import ColumnKind
from tabsynth.schemas import CorrelationDiff, HistogramData
from tabsynth.services.parallel import map_chunks
from tabsynth.services.preprocess import TabularDataset

log = logging.getLogger("tabsynth")


def _paired(y_true, y_pred) -> tuple[np.ndarray, np.ndarray]:
    y_true, y_pred = np.asarray(y_true), np.asarray(y_pred)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise ValueError(f"score inputs must be 1-D and equal length, got {y_true.shape} and {y_pred.shape}")
    if y_true.size == 0:
        raise ValueError("score inputs are empty")
    return y_true, y_pred


# ---------------------------------------------------------------------------
# Predictive scores
# ---------------------------------------------------------------------------

def f1_score(y_true, y_pred) -> float:
    """Macro-averaged F1 over every label seen in either argument."""
    y_true, y_pred = _paired(y_true, y_pred)
    scores = []
    for label in np.union1d(y_true, y_pred):
        tp = np.sum((y_pred == label) & (y_true == label))
        fp = np.sum((y_pred == label) & (y_true != label))
        fn = np.sum((y_pred != label) & (y_true == label))
        denom = 2 * tp + fp + fn
        scores.append(2 * tp / denom if denom else 0.0)
    return float(np.mean(scores))


def r2_score(y_true, y_pred) -> float:
    y_true, y_pred = _paired(y_true, y_pred)
    y_true = y_true.astype(np.float64)
    ss_tot = np.sum((y_true - y_true.mean()) ** 2)
    if ss_tot == 0:
        raise UndefinedScoreError("R2 is undefined when the true values have zero variance")
    return float(1.0 - np.sum((y_true - y_pred) ** 2) / ss_tot)


# ---------------------------------------------------------------------------
# Distance to closest record
# ---------------------------------------------------------------------------

def closest_distances(real: np.ndarray, synthetic: np.ndarray, threads: int = 1) -> np.ndarray:
    """Per synthetic row, the Euclidean distance to the nearest real row."""
    real = np.asarray(real, dtype=np.float64)
    synthetic = np.asarray(synthetic, dtype=np.float64)
    if len(real) == 0 or len(synthetic) == 0:
        raise ValueError("DCR needs non-empty real and synthetic sets")
    if real.shape[1] != synthetic.shape[1]:
        raise ValueError("real and synthetic rows live in different spaces")

    def chunk(_: int, start: int, stop: int) -> np.ndarray:
        return cdist(synthetic[start:stop], real).min(axis=1)

    return np.concatenate(map_chunks(chunk, len(synthetic), settings.sample_chunk_rows, threads))


def dcr(real: np.ndarray, synthetic: np.ndarray, threads: int = 1) -> float:
    return float(np.median(closest_distances(real, synthetic, threads)))


# ---------------------------------------------------------------------------
# Associations
# ---------------------------------------------------------------------------

def pearson(a, b) -> float:
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        return 0.0
    return float(np.clip(np.corrcoef(a, b)[0, 1], -1.0, 1.0))


def conditional_entropy(target, given) -> float:
    """H(target | given) in nats."""
    table = crosstab(np.asarray(given), np.asarray(target)).count
    weights = table.sum(axis=1) / table.sum()
    return float(sum(w * entropy(row) for w, row in zip(weights, table)))


def theils_u(target, given) -> float:
    """Share of the entropy of *target* explained by *given*; 0 for a constant target."""
    _, counts = np.unique(np.asarray(target), return_counts=True)
    h = entropy(counts)
    if h == 0:
        return 0.0
    return float(np.clip((h - conditional_entropy(target, given)) / h, 0.0, 1.0))


def correlation_ratio(categories, values) -> float:
    categories = np.asarray(categories)
    values = np.asarray(values, dtype=np.float64)
    grand = values.mean()
    ss_tot = np.sum((values - grand) ** 2)
    if ss_tot == 0:
        return 0.0
    ss_between = 0.0
    for c in np.unique(categories):
        group = values[categories == c]
        ss_between += len(group) * (group.mean() - grand) ** 2
    return float(np.clip(np.sqrt(ss_between / ss_tot), 0.0, 1.0))


class Associations(NamedTuple):
    columns: list[str]
    values: np.ndarray
    constant_columns: list[str]


def _columns(dataset: TabularDataset) -> list[tuple[str, np.ndarray, bool]]:
    cols = [(name, dataset.numerical[:, j], False) for j, name in enumerate(dataset.numerical_names)]
    cols += [(name, dataset.categorical[:, j], True) for j, name in enumerate(dataset.categorical_names)]
    cols.append((dataset.target_name, dataset.target, dataset.task.is_classification))
    return cols


def correlation_matrices(dataset: TabularDataset) -> Associations:
    """Pairwise associations in column order.

    Numerical pairs get Pearson, mixed pairs the correlation ratio and
    categorical pairs Theil's U with entry [i, j] = U(column i | column j).
    Entries involving a constant column are 0.
    """
    if len(dataset) < 2:
        raise ValueError("correlations need at least two rows")
    cols = _columns(dataset)
    constant = [name for name, v, _ in cols if np.unique(v).size < 2]
    if constant:
        log.warning("Constant column(s) %s: their correlations are reported as 0", constant)

    m = len(cols)
    out = np.zeros((m, m))
    for i, (name_i, a, cat_a) in enumerate(cols):
        for j, (name_j, b, cat_b) in enumerate(cols):
            if name_i in constant or name_j in constant:
                continue
            if cat_a and cat_b:
                out[i, j] = theils_u(a, b)
            elif cat_a:
                out[i, j] = correlation_ratio(a, b)
            elif cat_b:
                out[i, j] = correlation_ratio(b, a)
            else:
                out[i, j] = pearson(a, b)
    return Associations([c[0] for c in cols], out, constant)


def corr_diff(real: TabularDataset, synthetic: TabularDataset) -> CorrelationDiff:
    r = correlation_matrices(real)
    s = correlation_matrices(synthetic)
    if r.columns != s.columns:
        raise ValueError("real and synthetic datasets have different columns")
    return CorrelationDiff(
        columns=r.columns,
        values=np.abs(r.values - s.values).tolist(),
        constant_columns=sorted(set(r.constant_columns) | set(s.constant_columns)),
    )


# ---------------------------------------------------------------------------
# Histograms
# ---------------------------------------------------------------------------

def numeric_edges(values, bins: int) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    return np.linspace(lo, hi, bins + 1)


def binned(values, edges: np.ndarray) -> list[int]:
    """Counts per bin; values outside the edges land in the first or last bin."""
    clipped = np.clip(np.asarray(values, dtype=np.float64), edges[0], edges[-1])
    counts, _ = np.histogram(clipped, bins=edges)
    return counts.astype(int).tolist()


def histogram_export(real: TabularDataset, synthetic: TabularDataset, bins: int = 20) -> dict[str, HistogramData]:
    if bins < 2:
        raise ValueError("histograms need at least two bins")
    vocab = dict(zip(real.categorical_names, real.vocabularies))
    if real.task.is_classification:
        vocab[real.target_name] = real.target_vocabulary

    out: dict[str, HistogramData] = {}
    for (name, r, is_cat), (_, s, _) in zip(_columns(real), _columns(synthetic)):
        if is_cat:
            K = len(vocab[name])
            out[name] = HistogramData(
                kind=ColumnKind.CATEGORICAL,
                categories=list(vocab[name]),
                real=np.bincount(r.astype(np.int64), minlength=K).tolist(),
                synthetic=np.bincount(s.astype(np.int64), minlength=K).tolist(),
            )
        else:
            edges = numeric_edges(r, bins)
            out[name] = HistogramData(
                kind=ColumnKind.NUMERICAL,
                edges=edges.tolist(),
                real=binned(r, edges),
                synthetic=binned(s, edges),
            )
    return out
