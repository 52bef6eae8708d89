"""tabsynth smote: interpolation baseline."""

import argparse
from pathlib import Path

from tabsynth import config_store
from tabsynth.commands import load_dataset, override, resolve_data, write_csv
from tabsynth.services.smote import smote_sample


def register(subparsers: argparse._SubParsersAction) -> None:
    p = subparsers.add_parser("smote", help="generate rows by nearest-neighbour interpolation")
    p.add_argument("--data", type=Path)
    p.add_argument("--meta", type=Path)
    p.add_argument("--config", type=Path)
    p.add_argument("--k", type=int, dest="k_neighbours")
    p.add_argument("--lambda-lo", type=float)
    p.add_argument("--lambda-hi", type=float)
    p.add_argument("--proportion", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=run)


def run(args: argparse.Namespace, threads: int) -> None:
    config = config_store.load_run_config(args.config)
    lo, hi = config.smote.lambda_range
    lambda_range = None
    if args.lambda_lo is not None or args.lambda_hi is not None:
        lambda_range = (
            args.lambda_lo if args.lambda_lo is not None else lo,
            args.lambda_hi if args.lambda_hi is not None else hi,
        )
    smote_config = override(
        config.smote,
        k_neighbours=args.k_neighbours,
        lambda_range=lambda_range,
        sample_proportion=args.proportion,
        seed=args.seed,
    )
    dataset = load_dataset(*resolve_data(args.data, args.meta, config))
    write_csv(smote_sample(dataset, smote_config, threads), args.out)
