"""tabsynth sample: draw synthetic rows from a checkpoint."""

import argparse
import logging
from pathlib import Path

from tabsynth.commands import write_csv
from tabsynth.services import checkpoint, engine

log = logging.getLogger("tabsynth")


def register(subparsers: argparse._SubParsersAction) -> None:
    p = subparsers.add_parser("sample", help="generate synthetic rows from a checkpoint")
    p.add_argument("--checkpoint", type=Path, required=True)
    size = p.add_mutually_exclusive_group()
    size.add_argument("--n", type=int, help="number of rows")
    size.add_argument("--proportion", type=float, help="rows as a multiple of the training split size")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True, help="synthetic CSV")
    p.set_defaults(func=run)


def requested_rows(n: int | None, proportion: float | None, train_size: int) -> int | None:
    if n is not None:
        if n < 0:
            raise ValueError("--n must not be negative")
        return n
    if proportion is not None:
        if proportion <= 0:
            raise ValueError("--proportion must be positive")
        return int(round(proportion * train_size))
    return None


def run(args: argparse.Namespace, threads: int) -> None:
    fitted = checkpoint.load(args.checkpoint)
    n = requested_rows(args.n, args.proportion, fitted.encoder.train_size)
    synthetic = engine.sample(fitted, n=n, seed=args.seed, threads=threads)
    write_csv(synthetic, args.out)
