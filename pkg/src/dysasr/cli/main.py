"""
Dysasr Command Line

Usage:
    dysasr synth --out DIR [--seed N]
    dysasr prepare --config exp.yaml [--seed N] [--jobs N] [--strict] [--force]
    dysasr run --config exp.yaml [--stage NAME] [--verbose]

Every stage subcommand (prepare, augment, train, search, adapt, decode,
score) runs that one stage; ``run`` runs every stage the config needs.

Exit codes: 0 success, 1 other toolkit error, 2 configuration error,
3 missing upstream stage, 4 numerical failure.
"""

import argparse
import logging
import sys
from pathlib import Path

import yaml
from pydantic import ValidationError

from dysasr import __version__
from dysasr.cli.pipeline import LOG_FORMAT, STAGES, Pipeline, synthesize
from dysasr.core.errors import ConfigError, DysasrError, MissingStageError, NumericalError
from dysasr.core.models import ExperimentConfig

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_MISSING = 3
EXIT_NUMERICAL = 4


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    """Experiment config with command-line overrides applied."""
    overrides = {"seed": args.seed, "jobs": args.jobs}
    if args.strict:
        overrides["strict"] = True
    return ExperimentConfig.load(args.config, **overrides)


def cmd_prepare(config: ExperimentConfig, force: bool = False) -> Path:
    return Pipeline(config, force).run_stage("prepare")


def cmd_augment(config: ExperimentConfig, force: bool = False) -> Path:
    return Pipeline(config, force).run_stage("augment")


def cmd_train(config: ExperimentConfig, force: bool = False) -> Path:
    return Pipeline(config, force).run_stage("train")


def cmd_search(config: ExperimentConfig, force: bool = False) -> Path:
    return Pipeline(config, force).run_stage("search")


def cmd_adapt(config: ExperimentConfig, force: bool = False) -> Path:
    return Pipeline(config, force).run_stage("adapt")


def cmd_decode(config: ExperimentConfig, force: bool = False) -> Path:
    return Pipeline(config, force).run_stage("decode")


def cmd_score(config: ExperimentConfig, force: bool = False) -> Path:
    return Pipeline(config, force).run_stage("score")


def cmd_run(config: ExperimentConfig, force: bool = False, stage: str | None = None) -> Path:
    """Every stage the config needs, or just ``stage``."""
    pipeline = Pipeline(config, force)
    pipeline.run([stage] if stage else None)
    return config.experiment_dir


COMMANDS = {
    "prepare": cmd_prepare,
    "augment": cmd_augment,
    "train": cmd_train,
    "search": cmd_search,
    "adapt": cmd_adapt,
    "decode": cmd_decode,
    "score": cmd_score,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dysasr", description="Dysarthric speech recognition experiments"
    )
    parser.add_argument("--version", action="version", version=f"dysasr {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="Write the bundled synthetic corpus")
    synth.add_argument("--out", type=Path, required=True, help="Output directory")
    synth.add_argument("--seed", type=int, default=0, help="Corpus seed")
    synth.add_argument("--n-control", type=int, default=1, help="Number of control speakers")
    synth.add_argument(
        "--n-dysarthric", type=int, default=1, help="Number of dysarthric speakers"
    )
    synth.add_argument("--verbose", action="store_true", help="Enable verbose logging")

    for name in [*COMMANDS, "run"]:
        help_text = "Run every stage the config needs" if name == "run" else f"Run the {name} stage"
        stage = sub.add_parser(name, help=help_text)
        stage.add_argument("--config", type=Path, required=True, help="Experiment YAML file")
        stage.add_argument("--seed", type=int, help="Override the experiment seed")
        stage.add_argument("--jobs", type=int, help="Parallel workers within a stage")
        stage.add_argument(
            "--strict", action="store_true", help="Reject unknown manifest keys and missing audio"
        )
        stage.add_argument("--force", action="store_true", help="Rerun up-to-date stages")
        stage.add_argument("--verbose", action="store_true", help="Enable verbose logging")
        if name == "run":
            stage.add_argument("--stage", choices=STAGES, help="Run only this stage")
    return parser


def run_cli(argv: list[str] | None = None) -> int:
    """Parse ``argv``, run the command and return its exit code."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO, format=LOG_FORMAT, force=True
    )

    try:
        if args.command == "synth":
            records = synthesize(
                args.out,
                seed=args.seed,
                n_control=args.n_control,
                n_dysarthric=args.n_dysarthric,
            )
            logger.info("wrote %d utterances to %s", len(records), args.out)
            return EXIT_OK
        config = load_config(args)
        if args.command == "run":
            cmd_run(config, args.force, args.stage)
        else:
            COMMANDS[args.command](config, args.force)
        return EXIT_OK
    except MissingStageError as e:
        logger.error("%s", e)
        return EXIT_MISSING
    except (ConfigError, ValidationError, yaml.YAMLError, FileNotFoundError) as e:
        logger.error("configuration error: %s", e)
        return EXIT_CONFIG
    except NumericalError as e:
        logger.error("numerical failure: %s", e)
        return EXIT_NUMERICAL
    except DysasrError as e:
        logger.error("%s", e)
        return EXIT_ERROR


def main() -> None:
    """Main entry point."""
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
