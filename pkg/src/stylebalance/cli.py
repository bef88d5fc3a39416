"""Command-line entry point.

Subcommands mirror the pipeline stages: ingest, plan, generate,
review-serve, export, verify. Every command takes --config (and an
optional --seed override) and echoes the effective config hash so
artifacts can be traced to the configuration that produced them.

Exit codes: 0 success, 1 error, 2 completed but balance unreachable.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, load_config
from .dataset import DatasetError
from .domains import DomainError
from .export import ExportError
from .qc import ReviewError
from .selection import SelectionError
from .transfer import TranslationError
from . import pipeline
from .service import serve

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_UNBALANCED = 2

_STAGE_ERRORS = (
    ConfigError,
    DatasetError,
    DomainError,
    SelectionError,
    TranslationError,
    ReviewError,
    ExportError,
    OSError,
    ValueError,
)


def _print_distribution(counts: dict[str, int]) -> None:
    width = max((len(name) for name in counts), default=0)
    for name, count in counts.items():
        print(f"  {name:<{width}}  {count}")


def cmd_ingest(args) -> int:
    config = load_config(args.config, seed_override=args.seed)
    summary = pipeline.ingest(config)
    print(f"config: {summary.config_hash}")
    print(f"records: {summary.record_count}")
    print("class distribution:")
    _print_distribution(summary.distribution.counts)
    ratio = summary.distribution.imbalance_ratio
    print(f"imbalance ratio: {ratio if ratio is not None else 'undefined'}")
    print("domain pools:")
    _print_distribution(summary.pool_sizes)
    return EXIT_OK


def cmd_plan(args) -> int:
    config = load_config(args.config, seed_override=args.seed)
    plan = pipeline.build_plan(config)
    print(f"config: {config.config_hash()}")
    print(f"plan: {config.plan_path}")
    print(f"jobs: {len(plan.jobs)} ({plan.total_copies} copies)")
    trace = " -> ".join(
        "inf" if r is None else f"{float(r):.3f}" for r in plan.objective_trace
    )
    print(f"objective: {trace}")
    print("predicted distribution:")
    _print_distribution(plan.predicted.counts)
    if not plan.balanced:
        final = plan.objective_trace[-1]
        print(
            f"balance unreachable: best ratio "
            f"{'inf' if final is None else float(final):} > tolerance {float(plan.tolerance)}"
        )
        return EXIT_UNBALANCED
    return EXIT_OK


def cmd_generate(args) -> int:
    config = load_config(args.config, seed_override=args.seed)
    summary = pipeline.generate(config)
    print(f"config: {config.config_hash()}")
    print(f"generated: {summary.generated}  skipped: {summary.skipped}")
    print(f"queue: {summary.by_state}")
    if summary.failures:
        print(f"failures: {len(summary.failures)}", file=sys.stderr)
        for item_id, reason in summary.failures:
            print(f"  {item_id}: {reason}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


def cmd_review_serve(args) -> int:
    config = load_config(args.config, seed_override=args.seed)
    print(f"config: {config.config_hash()}")
    print(f"serving review queue {config.queue_dir} on {config.bind}")
    serve(config.queue_dir, config.tolerance, config.bind, config.ui_dir)
    return EXIT_OK


def cmd_export(args) -> int:
    config = load_config(args.config, seed_override=args.seed)
    manifest, report = pipeline.run_export(config, pending_policy=args.export_pending)
    print(f"config: {config.config_hash()}")
    augmented = sum(1 for e in manifest.entries if e.origin == "augmented")
    print(f"exported: {len(manifest.entries)} entries ({augmented} augmented)")
    print("final distribution:")
    _print_distribution(report.counts)
    ratio = "undefined" if report.ratio is None else f"{float(report.ratio):.4f}"
    print(f"ratio: {ratio}  balanced: {report.balanced}")
    return EXIT_OK if report.balanced else EXIT_UNBALANCED


def cmd_verify(args) -> int:
    config = load_config(args.config, seed_override=args.seed)
    report = pipeline.run_verify(config)
    print(f"config: {config.config_hash()}")
    print("distribution:")
    _print_distribution(report.counts)
    ratio = "undefined" if report.ratio is None else f"{float(report.ratio):.4f}"
    print(f"ratio: {ratio}  balanced: {report.balanced}")
    return EXIT_OK if report.balanced else EXIT_UNBALANCED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stylebalance",
        description="Class-rebalance a detection dataset via style-transferred "
        "copies of minority-class images",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, handler, help_text):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="run config file")
        cmd.add_argument("--seed", type=int, default=None, help="override config seed")
        cmd.set_defaults(handler=handler)
        return cmd

    add("ingest", cmd_ingest, "parse and validate the dataset, print the summary")
    add("plan", cmd_plan, "write the augmentation plan")
    add("generate", cmd_generate, "run translation jobs and fill the review queue")
    add("review-serve", cmd_review_serve, "run the HTTP review service")
    export_cmd = add("export", cmd_export, "write the balanced dataset")
    export_cmd.add_argument(
        "--export-pending",
        choices=["accept", "reject"],
        default="block",
        help="treat still-pending review items as accepted or rejected "
        "(default: refuse to export)",
    )
    add("verify", cmd_verify, "recount an existing export against the tolerance")
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except _STAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
