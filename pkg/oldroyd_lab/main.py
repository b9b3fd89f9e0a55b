"""
Oldroyd-B Lab - verification harness
Command-line entry point
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

from .config import ExperimentConfig, expand_sweep, parse_config
from .experiments import EXPERIMENTS
from .services.verification import dumps, summarize_reports
from .utils.errors import ConfigurationError, OldroydError

# Configure logging
logging.basicConfig(
    level=getattr(logging, os.getenv("LOG_LEVEL", "INFO").upper(), logging.INFO),
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
)
logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_RUNTIME_ERROR = 3


def run_experiments(configs: List[ExperimentConfig]) -> int:
    failed = 0
    for config in configs:
        logger.info(f"Running {config.experiment} into {config.output.directory}")
        outcome = EXPERIMENTS[config.experiment](config)
        for check in outcome.report.failures:
            logger.info(f"FAILED {check.name}: lhs={check.lhs:.6g} {check.relation} rhs={check.rhs:.6g} {check.note}")
        if not outcome.passed:
            failed += 1
    if failed:
        logger.info(f"{failed} of {len(configs)} runs had failing checks")
        return EXIT_CHECK_FAILED
    return EXIT_PASS


def command_run(args: argparse.Namespace) -> int:
    config = parse_config(args.config)
    return run_experiments(expand_sweep(config))


def command_verify(args: argparse.Namespace) -> int:
    """Toolbox checks only, on the grid the config names"""
    config = parse_config(args.config)
    toolbox = config.model_copy(update={"experiment": "toolbox"})
    return run_experiments([toolbox])


def command_report(args: argparse.Namespace) -> int:
    directory = Path(args.directory)
    if not directory.is_dir():
        raise ConfigurationError(f"report directory {directory} does not exist")
    summary = summarize_reports(directory)
    path = directory / "summary.json"
    path.write_bytes(dumps(summary))
    logger.info(f"Summary of {len(summary['reports'])} reports written to {path}")
    return EXIT_PASS if summary["passed"] else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oldroyd-lab", description="Corotational Oldroyd-B solver and estimate verification")
    commands = parser.add_subparsers(dest="command", required=True)

    run_parser = commands.add_parser("run", help="Run the experiment a config file names")
    run_parser.add_argument("config", help="key = value experiment config")
    run_parser.set_defaults(handler=command_run)

    verify_parser = commands.add_parser("verify", help="Run only the toolbox checks")
    verify_parser.add_argument("config", help="key = value experiment config")
    verify_parser.set_defaults(handler=command_verify)

    report_parser = commands.add_parser("report", help="Summarize every verification.json below a directory")
    report_parser.add_argument("directory")
    report_parser.set_defaults(handler=command_report)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ConfigurationError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG_ERROR
    except OldroydError as e:
        logger.error(f"Run failed: {e}")
        return EXIT_RUNTIME_ERROR
    except Exception as e:
        logger.error(f"Unhandled exception: {e}", exc_info=True)
        return EXIT_RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
