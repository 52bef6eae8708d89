"""Chunked, order-preserving fan-out over a thread pool."""

from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

import numpy as np

T = TypeVar("T")


def chunk_bounds(n: int, chunk_rows: int) -> list[tuple[int, int]]:
    return [(start, min(start + chunk_rows, n)) for start in range(0, n, chunk_rows)]


def chunk_rng(seed: int, chunk_index: int) -> np.random.Generator:
    """Generator for one chunk; depends only on (seed, chunk_index), never on thread count."""
    return np.random.default_rng([seed, chunk_index])


def map_chunks(
    fn: Callable[[int, int, int], T],
    n: int,
    chunk_rows: int,
    threads: int = 1,
) -> list[T]:
    """Call ``fn(chunk_index, start, stop)`` for every chunk and return results in chunk order."""
    bounds = chunk_bounds(n, chunk_rows)
    if threads <= 1 or len(bounds) <= 1:
        return [fn(i, start, stop) for i, (start, stop) in enumerate(bounds)]
    with ThreadPoolExecutor(max_workers=min(threads, len(bounds))) as pool:
        futures = [pool.submit(fn, i, start, stop) for i, (start, stop) in enumerate(bounds)]
        return [f.result() for f in futures]
