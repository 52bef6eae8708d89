"""tabsynth compare: run both generators end to end and tabulate the results."""

import argparse
import logging
from pathlib import Path

import pandas as pd

from tabsynth import config_store
from tabsynth.commands import load_dataset, resolve_data, write_csv
from tabsynth.commands.train import loss_log_path
from tabsynth.models import Method
from tabsynth.schemas import CompareReport, CompareRow, DataPaths, EvalReport
from tabsynth.services import checkpoint, engine
from tabsynth.services.evaluation import evaluate
from tabsynth.services.loss_log import LossLog
from tabsynth.services.smote import smote_sample

log = logging.getLogger("tabsynth")


def register(subparsers: argparse._SubParsersAction) -> None:
    p = subparsers.add_parser("compare", help="train, sample and evaluate both methods on one dataset")
    p.add_argument("--real", type=Path, help="dataset CSV")
    p.add_argument("--meta", type=Path)
    p.add_argument("--config", type=Path)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.set_defaults(func=run)


def compare_frame(report: CompareReport) -> pd.DataFrame:
    rows = []
    for row in report.rows:
        entry = {"method": row.method.value, "dcr": row.dcr}
        entry.update({f"efficiency[{k}]": v for k, v in row.efficiency.items()})
        rows.append(entry)
    return pd.DataFrame(rows)


def run(args: argparse.Namespace, threads: int) -> None:
    config = config_store.load_run_config(args.config)
    data_path, meta_path = resolve_data(args.real, args.meta, config)
    real = load_dataset(data_path, meta_path)
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    effective = config.model_copy(update={"data": DataPaths(path=data_path, meta=meta_path)})
    config_store.save_yaml(out / "run.effective.yaml", effective)

    losses = LossLog()
    log.info("Training the diffusion model")
    fitted = engine.fit(real, config.train, losses)
    checkpoint.save(fitted, out / "tabddpm.ckpt")
    losses.write_csv(loss_log_path(out / "tabddpm.ckpt"))

    synthetic = {
        Method.TABDDPM: engine.sample(fitted, seed=config.train.seed, threads=threads),
        Method.SMOTE: smote_sample(real, config.smote, threads),
    }

    rows = []
    for method, data in synthetic.items():
        write_csv(data, out / f"{method.value}.csv")
        report: EvalReport = evaluate(real, data, config.eval, threads)
        config_store.save_json(out / f"{method.value}_report.json", report)
        rows.append(CompareRow(method=method, efficiency=report.efficiency, dcr=report.dcr))

    summary = CompareReport(rows=rows)
    config_store.save_json(out / "compare.json", summary)
    compare_frame(summary).to_csv(out / "compare.csv", index=False)
    for row in rows:
        log.info("%s: dcr=%.4f efficiency=%s", row.method.value, row.dcr, row.efficiency)
