"""Binary checkpoint: trained denoiser, preprocessing state and schedule.

Layout (little-endian)::

    b"TBDD" | u16 version | u32 header length | JSON header
    u32 tensor count
    per tensor: u16 name length | name | u8 ndim | u32 dims... | float32 data

The JSON header carries the schedule parameters, denoiser and training
configuration and the fitted preprocessing state.
"""

import io
import json
import logging
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from tabsynth.errors import CheckpointFormatError
from tabsynth.schemas import TrainConfig
from tabsynth.services.denoiser import DenoiserConfig, DenoiserModel
from tabsynth.services.preprocess import TabularEncoder
from tabsynth.services.schedule import NoiseSchedule, cosine_schedule

log = logging.getLogger("tabsynth")

MAGIC = b"TBDD"
FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    model: DenoiserModel
    encoder: TabularEncoder
    schedule: NoiseSchedule
    train_config: TrainConfig

    @property
    def seed(self) -> int:
        return self.train_config.seed


def _header(checkpoint: Checkpoint) -> dict:
    sched = checkpoint.schedule
    return {
        "schedule": {"T": sched.T, "s": sched.s, "clip": sched.clip},
        "denoiser": asdict(checkpoint.model.config),
        "train": checkpoint.train_config.model_dump(mode="json"),
        "task": checkpoint.encoder.task.value,
        "seed": checkpoint.seed,
        "preprocessing": checkpoint.encoder.to_state(),
    }


def dumps(checkpoint: Checkpoint) -> bytes:
    buf = io.BytesIO()
    header = json.dumps(_header(checkpoint)).encode("utf-8")
    buf.write(MAGIC)
    buf.write(struct.pack("<HI", FORMAT_VERSION, len(header)))
    buf.write(header)

    params = checkpoint.model.parameters()
    buf.write(struct.pack("<I", len(params)))
    for name, p in params.items():
        encoded = name.encode("utf-8")
        buf.write(struct.pack("<H", len(encoded)))
        buf.write(encoded)
        buf.write(struct.pack("<B", p.ndim))
        buf.write(struct.pack(f"<{p.ndim}I", *p.shape))
        buf.write(np.ascontiguousarray(p, dtype="<f4").tobytes())
    return buf.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0

    def read(self, n: int) -> bytes:
        if self._pos + n > len(self._data):
            raise CheckpointFormatError("checkpoint is truncated")
        chunk = self._data[self._pos:self._pos + n]
        self._pos += n
        return chunk

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.read(struct.calcsize(fmt)))

    @property
    def exhausted(self) -> bool:
        return self._pos == len(self._data)


def loads(data: bytes) -> Checkpoint:
    reader = _Reader(data)
    if reader.read(4) != MAGIC:
        raise CheckpointFormatError("not a tabsynth checkpoint (bad magic)")
    version, header_len = reader.unpack("<HI")
    if version != FORMAT_VERSION:
        raise CheckpointFormatError(
            f"checkpoint format version {version} is not supported (expected {FORMAT_VERSION})"
        )
    try:
        header = json.loads(reader.read(header_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointFormatError(f"corrupt checkpoint header: {exc}") from exc

    (count,) = reader.unpack("<I")
    params: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = reader.unpack("<H")
        try:
            name = reader.read(name_len).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CheckpointFormatError(f"corrupt tensor name: {exc}") from exc
        (ndim,) = reader.unpack("<B")
        shape = reader.unpack(f"<{ndim}I")
        size = int(np.prod(shape, dtype=np.int64))
        params[name] = np.frombuffer(reader.read(4 * size), dtype="<f4").reshape(shape).astype(np.float32)
    if not reader.exhausted:
        raise CheckpointFormatError("trailing bytes after the last tensor")

    try:
        sched = header["schedule"]
        schedule = cosine_schedule(sched["T"], s=sched["s"], clip=sched["clip"])
        model = DenoiserModel(DenoiserConfig(**header["denoiser"]), np.random.default_rng(0))
        model.load_parameters(params)
        return Checkpoint(
            model=model,
            encoder=TabularEncoder.from_state(header["preprocessing"]),
            schedule=schedule,
            train_config=TrainConfig(**header["train"]),
        )
    except KeyError as exc:
        raise CheckpointFormatError(f"checkpoint header is missing {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise CheckpointFormatError(f"checkpoint header is inconsistent: {exc}") from exc


def save(checkpoint: Checkpoint, path: Path) -> None:
    """Atomically write *checkpoint* to *path*."""
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(dumps(checkpoint))
    tmp.replace(path)
    log.info("Checkpoint written to %s", path)


def load(path: Path) -> Checkpoint:
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise CheckpointFormatError(f"cannot read checkpoint {path}: {exc}") from exc
    return loads(data)
