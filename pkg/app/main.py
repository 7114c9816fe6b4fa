"""Command-line entry point: ``iah <subcommand> [options]``."""
import argparse
import logging
import sys
import uuid
from pathlib import Path
from typing import List, Optional

from app.commands.base import RunContext
from app.commands.registry import CommandRegistry
from app.core.config import config_hash, load_run_config
from app.core.engine import PipelineEngine, default_pipeline
from app.core.errors import ValidationFailure
from app.core.logging import configure_logging
from app.core.workflow import Stage

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INVALID = 2

SUBCOMMANDS = {
    "gen-data": Stage.GEN_DATA,
    "train": Stage.TRAIN,
    "train-baseline": Stage.TRAIN_BASELINE,
    "encode": Stage.ENCODE,
    "index": Stage.INDEX,
    "query": Stage.QUERY,
    "evaluate": Stage.EVALUATE,
    "saliency": Stage.SALIENCY,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML run document")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config field, e.g. train.iterations=500")
    common.add_argument("--log-level", default=None)

    parser = argparse.ArgumentParser(
        prog="iah", description="Instance-aware hashing for multi-label image retrieval"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", parents=[common], help="generate the synthetic dataset")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--external-proposals", type=Path)

    for name in ("train", "train-baseline"):
        p = sub.add_parser(name, parents=[common], help=f"{name.replace('-', ' ')} and write a checkpoint")
        p.add_argument("--data", type=Path, required=True)
        p.add_argument("--out", type=Path, required=True)
        p.add_argument("--trace", type=Path, help="loss trace file (default: <out>.trace.csv)")

    p = sub.add_parser("encode", parents=[common], help="encode the database and query splits")
    p.add_argument("--ckpt", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out-codes", type=Path, required=True)

    p = sub.add_parser("index", parents=[common], help="build the per-category hash tables")
    p.add_argument("--codes", type=Path, required=True)
    p.add_argument("--threshold", type=float)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("query", parents=[common], help="rank the database for every query image")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--ckpt", type=Path)
    source.add_argument("--codes", type=Path)
    p.add_argument("--data", type=Path, help="dataset to encode queries from (with --ckpt)")
    p.add_argument("--index", type=Path)
    p.add_argument("--db-codes", type=Path, help="database codes for --semantic")
    p.add_argument("--topk", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--semantic", action="store_true", help="rank by the semantic code instead of the index")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("evaluate", parents=[common], help="write the metric report")
    p.add_argument("--codes", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--report", type=Path, required=True)

    p = sub.add_parser("saliency", parents=[common], help="write a saliency map as a graymap")
    p.add_argument("--ckpt", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--image-id", type=int, required=True)
    p.add_argument("--category", type=int, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("run-all", parents=[common], help="the whole pipeline for model and baseline")
    p.add_argument("--workdir", type=Path, required=True)
    return parser


def _options(args: argparse.Namespace) -> dict:
    skip = {"command", "config", "overrides", "log_level"}
    return {k: v for k, v in vars(args).items() if k not in skip}


def run(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    run_id = uuid.uuid4().hex[:8]
    extra = {"run_id": run_id, "stage": args.command}
    try:
        cfg = load_run_config(args.config, args.overrides)
        log.info("Config %s, seed %d", config_hash(cfg), cfg.seed, extra=extra)
        ctx = RunContext(cfg=cfg, run_id=run_id, options=_options(args))
        if args.command == "run-all":
            artifacts = PipelineEngine(ctx).run(default_pipeline(args.workdir))
            log.info("Pipeline finished: %s", ", ".join(sorted(artifacts)), extra=extra)
            return EXIT_OK
        result = CommandRegistry.default().get(SUBCOMMANDS[args.command]).run(ctx)
        if not result.ok:
            log.error(result.message, extra=extra)
            return EXIT_FAILURE
        log.info(result.message, extra=extra)
        return EXIT_OK
    except ValidationFailure as e:
        log.error("%s", e, extra=extra)
        return EXIT_INVALID
    except FileNotFoundError as e:
        log.error("%s", e, extra=extra)
        return EXIT_FAILURE
    except Exception as e:
        log.error("%s failed: %s", args.command, e, exc_info=True, extra=extra)
        return EXIT_FAILURE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
