"""
Command-line entry point: one subcommand per pipeline stage.

    python main.py synth --seed 7 --out runs/demo
    python main.py train --out runs/demo --slice beginning
"""

import argparse
import logging
import os
import sys
from typing import List, Optional

import structlog

from app.config import build_run_config, settings
from app.core import PipelineEngine
from app.errors import PipelineError
from app.models.schemas import Outcome, SliceWhich, Stage

import app.core.stages  # noqa: F401  registers the stage handlers

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PIPELINE = 2


def configure_logging():
    renderer = (
        structlog.dev.ConsoleRenderer()
        if settings.log_format.lower() == "console"
        else structlog.processors.JSONRenderer()
    )
    structlog.configure(
        processors=[
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.add_log_level,
            structlog.processors.format_exc_info,
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(
            logging.getLevelName(settings.log_level.upper())
        ),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
    )


logger = structlog.get_logger()

# ============================================================================
# Argument Parsing
# ============================================================================


class UsageParser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit status 1"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--dataset", help="Dataset manifest (JSON lines); defaults to <out>/manifest.jsonl")
    common.add_argument("--slice", choices=[s.value for s in SliceWhich], help="Video slice to model")
    common.add_argument("--outcome", action="append", choices=[o.value for o in Outcome],
                        help="Outcome to run; repeat for several (default: all five)")
    common.add_argument("--seed", type=int, help="Random seed")
    common.add_argument("--out", help="Output directory")
    common.add_argument("--config", help="JSON run configuration; flags override its values")

    parser = UsageParser(prog="main.py", description="Discover content effects in advertising videos")
    commands = parser.add_subparsers(dest="command", metavar="command", parser_class=UsageParser)
    commands.required = True
    helps = {
        Stage.SYNTH: "generate a synthetic corpus with planted effects",
        Stage.TRAIN: "train the text, audio and image models",
        Stage.PREDICT: "export holdout predictions and attention maps",
        Stage.FUSE: "fit combined models and importance tables",
        Stage.INTERPRET: "run the two-step hypothesis filter",
        Stage.SCORE: "write per-video scorecards",
        Stage.REPORT: "render attention and gradient-map figures",
    }
    for stage in Stage:
        commands.add_parser(stage.value, parents=[common], help=helps[stage])
    return parser


# ============================================================================
# Entry Point
# ============================================================================


def main(argv: Optional[List[str]] = None) -> int:
    configure_logging()
    args = build_parser().parse_args(argv)
    stage = Stage(args.command)

    try:
        settings.validate_critical_config()
        config = build_run_config(
            args.config,
            dataset=args.dataset,
            slice=args.slice,
            outcomes=args.outcome,
            seed=args.seed,
            out=args.out,
        )
        written = PipelineEngine(config.out).run(stage, config)
    except (PipelineError, ValueError) as e:
        message = str(e).splitlines()[0] if str(e) else type(e).__name__
        sys.stderr.write(f"error: {message}\n")
        return EXIT_PIPELINE

    for path in written:
        print(os.path.relpath(path, config.out))
    logger.info("command_completed", command=stage.value, artifacts=len(written), out=config.out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
