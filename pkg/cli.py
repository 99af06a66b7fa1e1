import argparse
import asyncio
import logging
import os
import sys
from experiment_manager import ExperimentManager, load_config
import tools
from tools.run_experiment import RunExperimentError
from tools.summarize_results import SummarizeResultsError

logger = logging.getLogger(__name__)

DEFAULT_CONFIG = os.path.join(os.path.dirname(os.path.abspath(__file__)), "config.yaml")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Joint beamforming, BD-RIS scattering and sub-panel placement experiments"
    )
    parser.add_argument("--log-level", default=None, help="Overrides settings.log_level")
    subparsers = parser.add_subparsers(dest="command", required=True)

    run = subparsers.add_parser("run", help="Run an experiment sweep")
    run.add_argument("--config", default=DEFAULT_CONFIG, help="Experiment config file")
    run.add_argument(
        "--experiment", default=None, help="Experiment name (first configured by default)"
    )
    run.add_argument("--out", default=None, help="Output directory")
    run.add_argument("--seed", type=int, default=None, help="Base seed")
    run.add_argument("--trials", type=int, default=None, help="Trials per sweep point")
    run.add_argument("--threads", type=int, default=None, help="Worker processes")

    summarize = subparsers.add_parser("summarize", help="Summarize a results CSV")
    summarize.add_argument("path", help="results.csv or the directory holding it")

    selftest = subparsers.add_parser("selftest", help="Run the numerical self-checks")
    selftest.add_argument("--seed", type=int, default=0)
    selftest.add_argument("--instances", type=int, default=5)
    return parser


def configure_logging(level: str):
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s - %(levelname)s - %(message)s",
    )


def run(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    configure_logging(args.log_level or config.settings.log_level)
    manager = ExperimentManager(config)
    experiment = args.experiment or manager.default_experiment_name()

    try:
        result = asyncio.run(
            tools.run_experiment(
                manager, experiment, args.trials, args.seed, args.out, args.threads
            )
        )
    except RunExperimentError as e:
        logger.error(str(e))
        return 1
    print(result)
    return 0


def summarize(args: argparse.Namespace) -> int:
    configure_logging(args.log_level or "INFO")
    try:
        result = asyncio.run(tools.summarize_results(args.path))
    except SummarizeResultsError as e:
        logger.error(str(e))
        return 1
    print(result)
    return 0


def selftest(args: argparse.Namespace) -> int:
    configure_logging(args.log_level or "INFO")
    result = asyncio.run(tools.selftest(args.seed, args.instances))
    print(result)
    return 0 if result.passed else 1


COMMANDS = {"run": run, "summarize": summarize, "selftest": selftest}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
