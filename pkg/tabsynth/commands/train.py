"""tabsynth train: fit the diffusion model and write a checkpoint plus loss log."""

import argparse
import logging
from pathlib import Path

from tabsynth import config_store
from tabsynth.commands import load_dataset, override, resolve_data
from tabsynth.services import checkpoint, engine
from tabsynth.services.loss_log import LossLog

log = logging.getLogger("tabsynth")


def loss_log_path(out: Path) -> Path:
    return out.with_name(out.stem + ".loss.csv")


def register(subparsers: argparse._SubParsersAction) -> None:
    p = subparsers.add_parser("train", help="train a diffusion model on a CSV dataset")
    p.add_argument("--data", type=Path, help="dataset CSV")
    p.add_argument("--meta", type=Path, help="metadata sidecar (YAML)")
    p.add_argument("--config", type=Path, help="run config (YAML)")
    p.add_argument("--out", type=Path, required=True, help="checkpoint path")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=run)


def run(args: argparse.Namespace, threads: int) -> None:
    config = config_store.load_run_config(args.config)
    train_config = override(config.train, seed=args.seed)
    dataset = load_dataset(*resolve_data(args.data, args.meta, config))

    losses = LossLog()
    fitted = engine.fit(dataset, train_config, losses)
    checkpoint.save(fitted, args.out)
    losses.write_csv(loss_log_path(args.out))
