"""Command-line interface for sgru-forecast.

Usage:
    sgru-forecast train --profile synthetic --out-dir runs/synth
    sgru-forecast forecast --checkpoint runs/synth/model.ckpt --n-sims 1000 --paths
    sgru-forecast evaluate --checkpoint runs/synth/model.ckpt
    sgru-forecast benchmark --config pm25.ini --seed 3
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Any, Callable, Dict, Optional

from . import __version__
from .config import PROFILES, RunConfig, load_config
from .exceptions import SgruForecastError
from .metrics import reports_to_frame
from .pipeline import RunOutputs, run_benchmark, run_evaluate, run_forecast, run_train

logger = logging.getLogger(__name__)


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    """Send log records to stderr; DEBUG with -v, WARNING with -q, INFO otherwise."""
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


def collect_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Map CLI flags onto dotted config keys; unset flags are left out."""
    overrides: Dict[str, Any] = {}
    if getattr(args, "seed", None) is not None:
        overrides["run.seed"] = args.seed
    if getattr(args, "out_dir", None) is not None:
        overrides["run.output_dir"] = args.out_dir
    if getattr(args, "n_sims", None) is not None:
        overrides["forecast.n_sims"] = args.n_sims
    if getattr(args, "paths", False):
        overrides["forecast.write_paths"] = True
    return overrides


def resolve_config(args: argparse.Namespace) -> RunConfig:
    return load_config(args.config, args.profile, collect_overrides(args))


def create_parser() -> argparse.ArgumentParser:
    """Create and configure the argument parser.

    Returns:
        Configured ArgumentParser instance
    """
    parser = argparse.ArgumentParser(
        prog="sgru-forecast",
        description="Probabilistic time-series forecasting with a stochastic GRU",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  sgru-forecast train --profile synthetic --out-dir runs/synth
  sgru-forecast forecast --checkpoint runs/synth/model.ckpt --paths
  sgru-forecast evaluate --checkpoint runs/synth/model.ckpt
  sgru-forecast benchmark --profile pm25 --config pm25.ini --seed 3
        """
    )

    parser.add_argument(
        "--version",
        action="version",
        version=f"%(prog)s {__version__}"
    )

    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    def add_common_args(command_parser: argparse.ArgumentParser) -> None:
        command_parser.add_argument(
            "--config",
            type=str,
            default=None,
            help="INI configuration file"
        )
        command_parser.add_argument(
            "--profile",
            choices=sorted(PROFILES),
            default=None,
            help="Dataset profile supplying defaults (applied before --config)"
        )
        command_parser.add_argument(
            "--out-dir",
            type=str,
            default=None,
            help="Directory for every output file"
        )
        command_parser.add_argument(
            "--seed",
            type=int,
            default=None,
            help="Seed for initialisation, training noise and simulations"
        )
        command_parser.add_argument(
            "--n-sims",
            type=int,
            default=None,
            help="Number of Monte-Carlo simulations (default: 500)"
        )
        command_parser.add_argument(
            "--paths",
            action="store_true",
            help="Also write every sample path to forecast_paths.csv"
        )
        verbosity = command_parser.add_mutually_exclusive_group()
        verbosity.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
        verbosity.add_argument("-q", "--quiet", action="store_true", help="Warnings only")

    def add_checkpoint_arg(command_parser: argparse.ArgumentParser) -> None:
        command_parser.add_argument(
            "--checkpoint",
            type=str,
            required=True,
            help="Checkpoint written by the train command"
        )

    train_parser = subparsers.add_parser(
        "train",
        help="Train the stochastic GRU and write a checkpoint",
        description="Train the stochastic GRU; writes model.ckpt, training_log.csv and resolved_config.ini."
    )
    add_common_args(train_parser)

    forecast_parser = subparsers.add_parser(
        "forecast",
        help="Forecast the prediction span from a checkpoint",
        description="Condition on recent history and simulate the prediction span; writes forecast.csv and forecast.svg."
    )
    add_common_args(forecast_parser)
    add_checkpoint_arg(forecast_parser)

    evaluate_parser = subparsers.add_parser(
        "evaluate",
        help="Score a checkpoint's forecast against held-out targets",
        description="Forecast from a checkpoint and write evaluation.csv (nrmse per step cutoff, with AR(1))."
    )
    add_common_args(evaluate_parser)
    add_checkpoint_arg(evaluate_parser)

    benchmark_parser = subparsers.add_parser(
        "benchmark",
        help="Train and compare against AR(1), LSTM, GRU and MLP baselines",
        description="Train every enabled model on identical splits and write benchmark.csv."
    )
    add_common_args(benchmark_parser)

    return parser


def print_outputs(outputs: RunOutputs) -> int:
    """Print written files and score tables, returning the exit code."""
    if outputs.reports:
        print(reports_to_frame(outputs.reports).to_string(index=False))
    for name, path in outputs.files.items():
        print(f"{name}: {path}")
    return 0


def _guarded(action: Callable[[], RunOutputs]) -> int:
    try:
        return print_outputs(action())
    except (SgruForecastError, FileNotFoundError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        logger.debug("Unhandled exception", exc_info=True)
        print(f"Unexpected error: {e}", file=sys.stderr)
        return 1


def _checkpoint_config(args: argparse.Namespace) -> Optional[RunConfig]:
    """Explicit config for checkpoint commands, or None to use the checkpoint's own."""
    if args.config is None and args.profile is None:
        return None
    return resolve_config(args)


def handle_train(args: argparse.Namespace) -> int:
    """Handle the train command.

    Args:
        args: Parsed command-line arguments

    Returns:
        Exit code (0 for success, 1 for failure)
    """
    return _guarded(lambda: run_train(resolve_config(args)))


def handle_forecast(args: argparse.Namespace) -> int:
    """Handle the forecast command."""
    return _guarded(
        lambda: run_forecast(args.checkpoint, _checkpoint_config(args), collect_overrides(args))
    )


def handle_evaluate(args: argparse.Namespace) -> int:
    """Handle the evaluate command."""
    return _guarded(
        lambda: run_evaluate(args.checkpoint, _checkpoint_config(args), collect_overrides(args))
    )


def handle_benchmark(args: argparse.Namespace) -> int:
    """Handle the benchmark command."""
    return _guarded(lambda: run_benchmark(resolve_config(args)))


HANDLERS = {
    "train": handle_train,
    "forecast": handle_forecast,
    "evaluate": handle_evaluate,
    "benchmark": handle_benchmark,
}


def main(args: Optional[list] = None) -> int:
    """Main entry point for the CLI.

    Args:
        args: Command-line arguments (defaults to sys.argv[1:])

    Returns:
        Exit code (0 for success, 1 for failure)
    """
    parser = create_parser()
    parsed_args = parser.parse_args(args)

    if parsed_args.command is None:
        parser.print_help()
        return 1

    configure_logging(parsed_args.verbose, parsed_args.quiet)
    return HANDLERS[parsed_args.command](parsed_args)


if __name__ == "__main__":
    sys.exit(main())
