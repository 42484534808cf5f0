"""Command-line entry point.

Subcommands: similarity, embed, fit, evaluate, rank, pipeline. Exit codes:
0 success, 1 validation error, 2 numerical failure; every failure prints
one machine-parsable diagnostic line on stderr.
"""

from __future__ import annotations

import argparse
import sys

from hetdr.errors import NumericalError
from hetdr.pipeline import (
    PipelineConfig,
    StageContext,
    run_embed,
    run_evaluate,
    run_fit,
    run_pipeline,
    run_rank,
    run_similarity,
)

_STAGE_RUNNERS = {
    "similarity": run_similarity,
    "embed": run_embed,
    "fit": run_fit,
    "evaluate": run_evaluate,
    "rank": run_rank,
    "pipeline": run_pipeline,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hetdr",
        description="Heterogeneous-network drug repurposing pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("similarity", "derive Jaccard similarity networks from association networks"),
        ("embed", "embed every square network and fuse per-kind features"),
        ("fit", "fit the PU matrix-completion model"),
        ("evaluate", "cross-validate and score the external drug set"),
        ("rank", "export top-k associations and the per-drug ranking"),
        ("pipeline", "run all stages in order with caching"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="pipeline config JSON")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, default=None, help="global seed (overrides config)")
        p.add_argument("--jobs", type=int, default=1, help="parallel embedding jobs")
        p.add_argument("--force", action="store_true", help="ignore stage caches")
    return parser


def _diag(kind: str, stage: str, message: str) -> None:
    msg = " ".join(str(message).split())
    sys.stderr.write(f"error kind={kind} stage={stage} msg={msg!r}\n")


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    stage = args.command
    try:
        cfg = PipelineConfig.from_json(args.config, out_override=args.out, seed_override=args.seed)
        ctx = StageContext(
            out_dir=cfg.out_dir, seed=cfg.seed, jobs=args.jobs, force=args.force
        )
        ctx.out_dir.mkdir(parents=True, exist_ok=True)
        _STAGE_RUNNERS[stage](cfg, ctx)
    except NumericalError as e:
        _diag("numerical", stage, str(e))
        return 2
    except (ValueError, KeyError, OSError) as e:
        _diag("validation", stage, str(e))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
