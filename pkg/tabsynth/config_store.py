"""YAML/JSON file I/O for metadata sidecars, run configs and reports."""

import enum
import json
import logging
from pathlib import Path
from typing import TypeVar

import yaml
from pydantic import BaseModel, ValidationError

from tabsynth.errors import ConfigError
from tabsynth.schemas import DatasetMeta, RunConfig

log = logging.getLogger("tabsynth")

M = TypeVar("M", bound=BaseModel)


# ---------------------------------------------------------------------------
# Internal helpers
# ---------------------------------------------------------------------------

def _read(path: Path) -> dict:
    """Read a YAML mapping; an empty file is an empty mapping."""
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path} is not valid YAML: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping at the top level")
    return data


def _validate(model: type[M], data: dict, path: Path) -> M:
    try:
        return model.model_validate(data)
    except ValidationError as exc:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}" for err in exc.errors()
        )
        raise ConfigError(f"{path}: {problems}") from exc


def _sanitize(obj):
    """Recursively convert enums and paths to plain values for serialization."""
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _write(path: Path, text: str) -> None:
    """Atomically write *text* to *path*."""
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)


# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------

def load_meta(path: Path) -> DatasetMeta:
    return _validate(DatasetMeta, _read(path), path)


def load_run_config(path: Path | None) -> RunConfig:
    """Load a run config; without a path every section takes its defaults."""
    if path is None:
        return RunConfig()
    config = _validate(RunConfig, _read(path), path)
    log.info("Run config loaded from %s", path)
    return config


def save_yaml(path: Path, data: dict | BaseModel) -> None:
    if isinstance(data, BaseModel):
        data = data.model_dump(mode="json", exclude_none=True)
    _write(path, yaml.safe_dump(_sanitize(data), default_flow_style=False, allow_unicode=True, sort_keys=False))


def save_json(path: Path, data: dict | list | BaseModel) -> None:
    if isinstance(data, BaseModel):
        text = data.model_dump_json(indent=2)
    else:
        text = json.dumps(_sanitize(data), indent=2)
    _write(path, text + "\n")
    log.info("Wrote %s", path)
