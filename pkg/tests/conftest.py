"""Shared toy datasets."""

from pathlib import Path

import numpy as np
import pandas as pd
import pytest
import yaml

from tabsynth.schemas import DatasetMeta
from tabsynth.services.preprocess import TabularDataset, load_csv

MIXTURE_META = {
    "task": "binclass",
    "columns": [
        {"name": "x", "kind": "numerical"},
        {"name": "color", "kind": "categorical"},
        {"name": "label", "kind": "target"},
    ],
}

COLOR_PROBS = {0: [0.2, 0.3, 0.5], 1: [0.6, 0.3, 0.1]}
COLORS = np.array(["red", "green", "blue"])


def mixture_frame(n: int, seed: int = 0, positive_rate: float = 0.3) -> pd.DataFrame:
    """One numeric, one three-way categorical and a binary class that drives both."""
    rng = np.random.default_rng(seed)
    label = (rng.random(n) < positive_rate).astype(int)
    x = np.where(label == 1, 2.0, -1.0) + rng.standard_normal(n)
    probs = np.array([COLOR_PROBS[int(c)] for c in label])
    codes = np.minimum((np.cumsum(probs, axis=1) < rng.random(n)[:, None]).sum(axis=1), 2)
    return pd.DataFrame({"x": x, "color": COLORS[codes], "label": np.array(["no", "yes"])[label]})


def regression_frame(n: int, seed: int = 0) -> pd.DataFrame:
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(n)
    b = rng.uniform(-1, 1, n)
    kind = rng.choice(["p", "q"], size=n)
    y = 2.0 * a - b + np.where(kind == "p", 1.0, -1.0) + 0.1 * rng.standard_normal(n)
    return pd.DataFrame({"a": a, "b": b, "kind": kind, "y": y})


REGRESSION_META = {
    "task": "regression",
    "columns": [
        {"name": "a", "kind": "numerical"},
        {"name": "b", "kind": "numerical"},
        {"name": "kind", "kind": "categorical"},
        {"name": "y", "kind": "target"},
    ],
}


def write_dataset(directory: Path, frame: pd.DataFrame, meta: dict, name: str = "data") -> tuple[Path, Path]:
    directory.mkdir(parents=True, exist_ok=True)
    csv_path = directory / f"{name}.csv"
    meta_path = directory / f"{name}.meta.yaml"
    frame.to_csv(csv_path, index=False)
    meta_path.write_text(yaml.safe_dump(meta, sort_keys=False))
    return csv_path, meta_path


def load_frame(tmp_path: Path, frame: pd.DataFrame, meta: dict, name: str = "data") -> TabularDataset:
    csv_path, _ = write_dataset(tmp_path, frame, meta, name)
    return load_csv(csv_path, DatasetMeta.model_validate(meta))


@pytest.fixture
def mixture_files(tmp_path) -> tuple[Path, Path]:
    return write_dataset(tmp_path, mixture_frame(400), MIXTURE_META, "mixture")


@pytest.fixture
def mixture(tmp_path) -> TabularDataset:
    return load_frame(tmp_path, mixture_frame(400), MIXTURE_META, "mixture")


@pytest.fixture
def regression(tmp_path) -> TabularDataset:
    return load_frame(tmp_path, regression_frame(300), REGRESSION_META, "regression")
