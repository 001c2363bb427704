import argparse
import json
import logging
import os
import sys
from typing import List, Optional

from dotenv import load_dotenv
from pydantic import ValidationError

from src.errors import ConfigError, InstanceError, InvariantViolation
from src.experiments import EXPERIMENTS, ExperimentConfig, load_config, run_experiment
from src.report_writer import schema_document

project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
load_dotenv()
DEFAULT_OUT_DIR = os.environ.get("OCRS_OUT_DIR")
DEFAULT_WORKERS = int(os.environ.get("OCRS_WORKERS", "1"))
LOG_FILE = os.environ.get("OCRS_LOG_FILE", os.path.join(project_root, 'experiments.log'))
log_configured = False
if not log_configured:
    log_dir = os.path.dirname(LOG_FILE); os.makedirs(log_dir, exist_ok=True)
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(name)s - %(message)s', filename=LOG_FILE, filemode='a')
    console_handler = logging.StreamHandler(sys.stderr); console_handler.setLevel(logging.INFO)
    formatter = logging.Formatter('%(levelname)s: %(message)s'); console_handler.setFormatter(formatter)
    if not logging.getLogger('').hasHandlers(): logging.getLogger('').addHandler(console_handler)
    log_configured = True
logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Run temporal OCRS experiments.")
    parser.add_argument("--schema", action="store_true", help="Print the runs.csv column contract and exit.")
    subparsers = parser.add_subparsers(dest="command")
    subparsers.add_parser("schema", help="Print the runs.csv column contract of every experiment as JSON.")
    for name in EXPERIMENTS:
        sub = subparsers.add_parser(name, help=f"Run the '{name}' experiment.")
        sub.add_argument("--config", "-c", required=True, help="Experiment config (JSON).")
        sub.add_argument("--out", "-o", default=None,
                         help="Output directory (defaults to the config's 'output', then OCRS_OUT_DIR, then results/<experiment>).")
        sub.add_argument("--seeds", "-s", type=int, default=None,
                         help="Run seeds offset..offset+N-1 instead of the config's seed list.")
        sub.add_argument("--seed-offset", "-k", type=int, default=0, help="Shift every seed by k.")
        sub.add_argument("--workers", "-w", type=int, default=DEFAULT_WORKERS,
                         help="Worker processes for the seed fan-out (defaults to OCRS_WORKERS or 1).")
    return parser


def apply_overrides(config: ExperimentConfig, command: str, seeds: Optional[int], seed_offset: int) -> ExperimentConfig:
    """Checks the subcommand against the config and applies the seed flags."""
    if config.experiment != command:
        raise ConfigError(f"Config is for '{config.experiment}' but the '{command}' subcommand was given")
    if seeds is not None:
        if seeds < 1:
            raise ConfigError(f"--seeds must be positive, got {seeds}")
        new_seeds: List[int] = list(range(seed_offset, seed_offset + seeds))
    else:
        new_seeds = [s + seed_offset for s in config.seeds]
    return config.model_copy(update={"seeds": new_seeds})


def output_dir(config: ExperimentConfig, out: Optional[str]) -> str:
    if out:
        return out
    if config.output:
        return config.output
    if DEFAULT_OUT_DIR:
        return DEFAULT_OUT_DIR
    return os.path.join(project_root, "results", config.experiment)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.schema or args.command == "schema":
        print(json.dumps(schema_document(), indent=4))
        return
    if args.command is None:
        parser.print_help(sys.stderr); sys.exit(2)
    if args.workers < 1:
        print("ERROR: --workers must be at least 1.", file=sys.stderr); sys.exit(2)

    try:
        config = apply_overrides(load_config(args.config), args.command, args.seeds, args.seed_offset)
    except (ConfigError, InstanceError, ValidationError, json.JSONDecodeError) as e:
        logger.error(f"Invalid configuration {args.config}: {e}", exc_info=True)
        print(f"ERROR: {e}", file=sys.stderr)
        sys.exit(2)

    out_dir = output_dir(config, args.out)
    logger.info(f"Experiment '{config.experiment}' with config {args.config}, output to {out_dir}")
    try:
        summary = run_experiment(config, out_dir, workers=args.workers)
    except (ConfigError, InstanceError) as e:
        logger.error(f"Experiment rejected its inputs: {e}", exc_info=True)
        print(f"ERROR: {e}", file=sys.stderr)
        sys.exit(2)
    except InvariantViolation as e:
        logger.error(f"Invariant violated during the run: {e}", exc_info=True)
        print(f"\nERROR: invariant violated: {e}. Partial rows kept in {out_dir}.", file=sys.stderr)
        sys.exit(1)
    except Exception as e:
        logger.error(f"Unexpected error during the run: {e}", exc_info=True)
        print(f"\nUnexpected error. Check {LOG_FILE}.", file=sys.stderr)
        sys.exit(1)

    print(json.dumps({k: summary[k] for k in ("experiment", "passed") if k in summary}, indent=4, default=str))
    logger.info("Run complete.")


if __name__ == "__main__":
    main()
