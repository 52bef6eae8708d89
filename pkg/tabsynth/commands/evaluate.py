"""tabsynth eval: score a synthetic CSV against the real dataset."""

import argparse
import logging
from pathlib import Path

from tabsynth import config_store
from tabsynth.commands import override
from tabsynth.models import Split
from tabsynth.services.evaluation import evaluate
from tabsynth.services.preprocess import load_csv

log = logging.getLogger("tabsynth")


def register(subparsers: argparse._SubParsersAction) -> None:
    p = subparsers.add_parser("eval", help="evaluate synthetic data against the real dataset")
    p.add_argument("--real", type=Path, required=True)
    p.add_argument("--synthetic", type=Path, required=True)
    p.add_argument("--meta", type=Path, required=True)
    p.add_argument("--config", type=Path)
    p.add_argument("--seeds", type=int, help="learner training seeds to average over")
    p.add_argument("--out", type=Path, required=True, help="report JSON")
    p.set_defaults(func=run)


def run(args: argparse.Namespace, threads: int) -> None:
    options = override(config_store.load_run_config(args.config).eval, seeds=args.seeds)
    meta = config_store.load_meta(args.meta)
    real = load_csv(args.real, meta)
    synthetic = load_csv(args.synthetic, meta, reference=real, force_split=Split.TRAIN)
    report = evaluate(real, synthetic, options, threads)
    config_store.save_json(args.out, report)
