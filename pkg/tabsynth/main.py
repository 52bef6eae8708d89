"""tabsynth – command-line entry point."""

import argparse
import logging
import sys

from tabsynth.commands import compare, evaluate, sample, smote, train
from tabsynth.config import settings
from tabsynth.errors import TabsynthError

log = logging.getLogger("tabsynth")

EXIT_USAGE = 2
COMMANDS = (train, sample, smote, evaluate, compare)


# ---------------------------------------------------------------------------
# Logging
# ---------------------------------------------------------------------------

def configure_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s [%(levelname)s] %(name)s – %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
        force=True,
    )


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tabsynth", description="Diffusion-based tabular data synthesis")
    parser.add_argument("--threads", type=int, help="worker cap (default: $TABSYNTH_THREADS or CPU count)")
    parser.add_argument("--log-level", help="DEBUG, INFO, WARNING, ... (default: $TABSYNTH_LOG_LEVEL)")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level or settings.log_level)
    threads = settings.resolve_threads(args.threads)
    log.info("tabsynth %s started (threads=%d)", args.command, threads)
    try:
        args.func(args, threads)
    except TabsynthError as exc:
        log.error("%s failed: %s", args.command, exc)
        return exc.exit_code
    except (ValueError, IndexError) as exc:
        log.error("%s: invalid argument: %s", args.command, exc)
        return EXIT_USAGE
    log.info("tabsynth %s finished", args.command)
    return 0


if __name__ == "__main__":
    sys.exit(main())
