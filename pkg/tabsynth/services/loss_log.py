"""In-memory record of per-step training losses, exportable as CSV."""

import logging
import threading
from collections import deque
from pathlib import Path

import pandas as pd

log = logging.getLogger("tabsynth")

COLUMNS = ["step", "l_simple", "l_multinomial", "total"]


class LossLog:
    """Keeps the last *maxlen* loss entries (all of them when *maxlen* is None)."""

    def __init__(self, maxlen: int | None = None):
        self._buffer: deque[dict] = deque(maxlen=maxlen)
        self._lock = threading.Lock()

    def append(self, step: int, breakdown) -> None:
        entry = {
            "step": step,
            "l_simple": breakdown.l_simple,
            "l_multinomial": breakdown.l_multinomial_mean,
            "total": breakdown.total,
        }
        with self._lock:
            self._buffer.append(entry)

    def __len__(self) -> int:
        with self._lock:
            return len(self._buffer)

    def get_entries(self, after_step: int = 0, limit: int = 200) -> list[dict]:
        """Return entries with step > *after_step*, up to the last *limit* of them."""
        with self._lock:
            entries = [e for e in self._buffer if e["step"] > after_step]
        return entries[-limit:]

    def to_frame(self) -> pd.DataFrame:
        with self._lock:
            return pd.DataFrame(list(self._buffer), columns=COLUMNS)

    def write_csv(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False)
        log.info("Loss log written to %s", path)
