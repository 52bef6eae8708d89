"""Interpolation baseline: convex combination of a record and its k-th nearest neighbour.

Neighbours are searched in the encoded space (quantile numerics and one-hot
categoricals, Euclidean); for classification only within the base record's
class, so labels carry over unchanged.
"""

import logging
from dataclasses import dataclass

import numpy as np

from tabsynth.config import settings
from tabsynth.errors import DataError
from tabsynth.models import Split
from tabsynth.schemas import SmoteConfig
from tabsynth.services.parallel import chunk_bounds, chunk_rng, map_chunks
from tabsynth.services.preprocess import TabularDataset, TabularEncoder

log = logging.getLogger("tabsynth")

CATEGORY_SWITCH = 0.5


def kth_nearest(encoded: np.ndarray, query_index: int, k: int) -> int:
    """Index of the k-th closest row to *query_index*, excluding the query itself.

    Ties resolve to the lower row index.
    """
    encoded = np.asarray(encoded, dtype=np.float64)
    if encoded.ndim == 1:
        encoded = encoded[:, None]
    if not 1 <= k < encoded.shape[0]:
        raise ValueError(f"k={k} out of range for {encoded.shape[0]} rows")
    dist = np.linalg.norm(encoded - encoded[query_index], axis=1)
    dist[query_index] = np.inf
    return int(np.argsort(dist, kind="stable")[k - 1])


@dataclass
class SmoteDraw:
    x: np.ndarray             # encoded synthetic rows [numerics | one-hots]
    labels: np.ndarray | None
    bases: np.ndarray         # training-row indices
    neighbours: np.ndarray
    lambdas: np.ndarray


def draw(
    numeric: np.ndarray,
    onehots: np.ndarray,
    labels: np.ndarray | None,
    config: SmoteConfig,
    n: int,
    threads: int = 1,
) -> SmoteDraw:
    """Generate *n* interpolated rows in encoded space."""
    rows = numeric.shape[0]
    space = np.concatenate([numeric, onehots], axis=1)
    k = config.k_neighbours
    lo, hi = config.lambda_range

    if labels is None:
        groups = {0: np.arange(rows)}
        group_of = np.zeros(rows, dtype=np.int64)
    else:
        groups = {int(c): np.flatnonzero(labels == c) for c in np.unique(labels)}
        group_of = labels.astype(np.int64)
    small = {c: len(idx) for c, idx in groups.items() if len(idx) <= k}
    if small:
        raise DataError(f"SMOTE with k={k} needs more than k rows per group; too few in {small}")

    def randomness(chunk_index: int, start: int, stop: int) -> tuple[np.ndarray, np.ndarray]:
        rng = chunk_rng(config.seed, chunk_index)
        return rng.integers(0, rows, size=stop - start), rng.uniform(lo, hi, size=stop - start)

    parts = [randomness(i, s, e) for i, (s, e) in enumerate(chunk_bounds(n, settings.sample_chunk_rows))]
    bases = np.concatenate([p[0] for p in parts]) if parts else np.zeros(0, dtype=np.int64)
    lambdas = np.concatenate([p[1] for p in parts]) if parts else np.zeros(0)

    unique = np.unique(bases)

    def neighbours_of(chunk_index: int, start: int, stop: int) -> np.ndarray:
        out = np.empty(stop - start, dtype=np.int64)
        for i, base in enumerate(unique[start:stop]):
            members = groups[int(group_of[base])]
            local = int(np.searchsorted(members, base))
            out[i] = members[kth_nearest(space[members], local, k)]
        return out

    found = map_chunks(neighbours_of, len(unique), settings.sample_chunk_rows, threads)
    lookup = dict(zip(unique.tolist(), np.concatenate(found).tolist())) if found else {}
    neighbours = np.array([lookup[b] for b in bases.tolist()], dtype=np.int64)

    lam = lambdas[:, None]
    x_num = (1.0 - lam) * numeric[bases] + lam * numeric[neighbours]
    x_cat = np.where(lam <= CATEGORY_SWITCH, onehots[bases], onehots[neighbours])
    return SmoteDraw(
        x=np.concatenate([x_num, x_cat], axis=1),
        labels=None if labels is None else labels[bases],
        bases=bases,
        neighbours=neighbours,
        lambdas=lambdas,
    )


def smote_sample(dataset: TabularDataset, config: SmoteConfig, threads: int = 1) -> TabularDataset:
    encoder = TabularEncoder().fit(dataset)
    train = dataset.split_view(Split.TRAIN)
    n = int(round(config.sample_proportion * len(train)))
    labels = train.target.astype(np.int64) if dataset.task.is_classification else None
    log.info(
        "SMOTE: %d rows from %d training rows (k=%d, lambda in [%g, %g])",
        n, len(train), config.k_neighbours, *config.lambda_range,
    )

    result = draw(encoder.numeric_block(train), encoder.onehot_block(train), labels, config, n, threads)
    synthetic = encoder.decode(result.x, result.labels)

    # Endpoints copy the original values rather than their decoded round trip.
    for endpoint, source in ((0.0, result.bases), (1.0, result.neighbours)):
        rows = np.flatnonzero(result.lambdas == endpoint)
        if rows.size:
            synthetic.numerical[rows] = train.numerical[source[rows]]
            if not dataset.task.is_classification:
                synthetic.target[rows] = train.target[source[rows]]
    return synthetic
