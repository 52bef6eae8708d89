"""CLI subcommands; each module exposes ``register(subparsers)`` and ``run(args, threads)``."""

import logging
from pathlib import Path
from typing import TypeVar

from pydantic import BaseModel, ValidationError

from tabsynth import config_store
from tabsynth.errors import ConfigError
from tabsynth.schemas import RunConfig
from tabsynth.services.preprocess import TabularDataset, load_csv

log = logging.getLogger("tabsynth")

M = TypeVar("M", bound=BaseModel)


def override(model: M, **updates) -> M:
    """Copy *model* with the non-None *updates* applied and re-validated."""
    changes = {k: v for k, v in updates.items() if v is not None}
    if not changes:
        return model
    try:
        return type(model).model_validate({**model.model_dump(), **changes})
    except ValidationError as exc:
        raise ConfigError(f"invalid option: {exc.errors()[0]['msg']}") from exc


def resolve_data(data: Path | None, meta: Path | None, config: RunConfig) -> tuple[Path, Path]:
    if data is None and config.data is not None:
        data = config.data.path
    if meta is None and config.data is not None:
        meta = config.data.meta
    if data is None or meta is None:
        raise ConfigError("a dataset needs both --data and --meta (or a 'data' section in the config)")
    return data, meta


def load_dataset(data: Path, meta: Path) -> TabularDataset:
    return load_csv(data, config_store.load_meta(meta))


def write_csv(dataset: TabularDataset, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    dataset.to_frame().to_csv(tmp, index=False)
    tmp.replace(path)
    log.info("Wrote %d rows to %s", len(dataset), path)
