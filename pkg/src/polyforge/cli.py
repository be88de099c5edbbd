"""Command-line entry point.

Each subcommand runs the pipeline up to and including its stage,
resuming from whatever checkpoints already exist in the output
directory.  Exit codes: 0 success, 2 configuration error, 3 backend
error, 4 partial completion (a stage aborted resumably).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import llm, pipeline

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BACKEND = 3
EXIT_PARTIAL = 4

# subcommand -> last pipeline stage it runs (None = full run)
_STAGE_OF = {
    "extract": "extract",
    "filter": "decontaminate",
    "gen-tests": "gen-tests",
    "validate": "coverage",
    "infer-types": "infer-types",
    "translate": "translate",
    "verify": "verify",
    "dedup": "dedup",
    "emit": None,
    "run-all": None,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polyforge",
        description="Turn documented Python functions into validated "
        "fine-tuning data for other languages.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*_STAGE_OF, "stats"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--lang", action="append", default=None,
                       help="target language (repeatable)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--resume", action="store_true")
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory")
    return parser


def load_config(args: argparse.Namespace) -> pipeline.PipelineConfig:
    try:
        raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise pipeline.ConfigError(f"cannot read config {args.config}: {exc}")
    cfg = pipeline.PipelineConfig.from_json(raw)
    if args.lang:
        cfg.languages = tuple(args.lang)
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.dedup = pipeline.DedupConfig(
            t=cfg.dedup.t, group_size=cfg.dedup.group_size,
            rounds=cfg.dedup.rounds, seed=args.seed,
        )
    if args.workers is not None:
        cfg.workers = args.workers
    if args.out is not None:
        cfg.out_dir = args.out
    return cfg


def build_client(cfg: pipeline.PipelineConfig) -> llm.LLMClient:
    llm_cfg = cfg.llm
    kind = llm_cfg.get("backend", "http")
    if kind == "mock":
        replay = llm_cfg.get("replay_path")
        backend = (
            llm.MockBackend.from_replay_log(replay)
            if replay
            else llm.MockBackend()
        )
    elif kind == "http":
        backend = llm.HTTPBackend(
            endpoint=llm_cfg.get("endpoint"), token=llm_cfg.get("token")
        )
    else:
        raise pipeline.ConfigError(f"unknown llm backend: {kind!r}")
    return llm.LLMClient(
        backend,
        max_retries=llm_cfg.get("max_retries", 3),
        max_in_flight=llm_cfg.get("max_in_flight", 8),
        replay_log_path=llm_cfg.get("log_path"),
    )


def cmd_stats(cfg: pipeline.PipelineConfig) -> int:
    path = Path(cfg.out_dir) / "funnel.json"
    if not path.exists():
        print(f"no funnel stats at {path} (run the pipeline first)",
              file=sys.stderr)
        return EXIT_CONFIG
    stats = pipeline.FunnelStats.from_json(
        json.loads(path.read_text(encoding="utf-8"))
    )
    print(stats.render())
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
    except (pipeline.ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "stats":
        return cmd_stats(cfg)

    try:
        client = build_client(cfg)
    except (pipeline.ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        dataset, stats = pipeline.run_all(
            cfg, client, resume=args.resume, stop_after=_STAGE_OF[args.command]
        )
    except pipeline.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (llm.BackendUnavailable, llm.MalformedResponse) as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except pipeline.StageSetupError as exc:
        print(f"stage aborted (resume with --resume): {exc}", file=sys.stderr)
        return EXIT_PARTIAL

    print(stats.render())
    if _STAGE_OF[args.command] is None:
        print(f"dataset: {len(dataset)} items -> "
              f"{Path(cfg.out_dir) / 'dataset.jsonl'}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
