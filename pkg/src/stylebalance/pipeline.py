"""Stage orchestration: each function is one pipeline stage, consuming
only the declared artifacts of the previous one (plan file, queue,
decision log) plus the input dataset, so stages can run in separate
processes.

Stage order: ingest -> plan -> generate -> review -> export -> verify.
Generation is resumable: items are keyed by the content-addressed id
"{source_id}__{target_domain}__{copy}" and anything already generated is
skipped on rerun.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

from .config import RunConfig
from .dataset import ClassDistribution, Dataset, class_distribution, load_dataset
from .domains import DomainPool, balance_domain_pool, build_domain_pools, read_override_file
from .export import (
    BalanceReport,
    ExportManifest,
    augmented_id,
    export_balanced_dataset,
    verify_balance,
)
from .qc import (
    ACCEPTED,
    PENDING,
    REJECTED,
    SEVERITY_BLOCK,
    DecisionLog,
    ReviewItem,
    ReviewQueue,
    append_item_file,
    auto_flag,
    enqueue,
    read_items_file,
    replay_log,
)
from .raster import load_raster, save_raster
from .selection import (
    AugmentationJob,
    AugmentationPlan,
    explicit_minority_spec,
    identify_minority_classes,
    plan_augmentation,
    read_plan_file,
    select_images,
    write_plan_file,
)
from .transfer import TranslationError, Translator, compute_style_target, translate

logger = logging.getLogger(__name__)


@dataclass
class IngestSummary:
    record_count: int
    distribution: ClassDistribution
    pool_sizes: dict[str, int]
    config_hash: str


@dataclass
class GenerateSummary:
    generated: int
    skipped: int
    failures: list[tuple[str, str]]
    by_state: dict[str, int]


def load_tagged_dataset(config: RunConfig) -> tuple[Dataset, DomainPool]:
    """Load the dataset and assign every record its style domain."""
    dataset = load_dataset(config.dataset_root, config.manifest, config.vocabulary)
    overrides = (
        read_override_file(config.overrides_path) if config.overrides_path else None
    )
    pool = build_domain_pools(dataset, config.anchors, overrides)
    return dataset.with_domains(pool.assignments), pool


def ingest(config: RunConfig) -> IngestSummary:
    dataset, pool = load_tagged_dataset(config)
    return IngestSummary(
        record_count=len(dataset),
        distribution=class_distribution(dataset),
        pool_sizes=pool.sizes(),
        config_hash=config.config_hash(),
    )


def build_plan(config: RunConfig) -> AugmentationPlan:
    """Plan stage: select minority-rich images and write the plan file."""
    dataset, pool = load_tagged_dataset(config)
    dist = class_distribution(dataset)
    if config.minority_classes:
        spec = explicit_minority_spec(config.vocabulary, config.minority_classes)
    else:
        spec = identify_minority_classes(dist, config.minority_threshold)
    selected = select_images(dataset, spec, config.score_lambda)
    plan = plan_augmentation(
        dataset,
        selected,
        pool,
        tolerance=config.tolerance,
        max_copies_per_pair=config.max_copies_per_pair,
        max_total_jobs=config.max_total_jobs,
    )
    config.work_dir.mkdir(parents=True, exist_ok=True)
    write_plan_file(
        plan,
        config.plan_path,
        lam=config.score_lambda,
        seed=config.seed,
        config_hash=config.config_hash(),
    )
    return plan


def make_translator(config: RunConfig, dataset: Dataset, pool: DomainPool) -> Translator:
    """Build the configured translator; statistical kinds derive their
    per-domain style targets from equal-size (balanced) domain pools."""
    if config.translator == "identity":
        return Translator(kind="identity")
    if config.translator == "external":
        return Translator(
            kind="external",
            command=config.external_command,
            timeout=config.external_timeout,
        )
    balanced = balance_domain_pool(pool, config.seed)
    by_id = dataset.by_id()
    targets = {}
    for domain in config.domains:
        ids = balanced.pools.get(domain, ())
        if not ids:
            raise TranslationError(
                f"domain {domain!r} has an empty balanced pool; statistical "
                "translation needs at least one image per domain"
            )
        rasters = (load_raster(by_id[i].image_path) for i in ids)
        targets[domain] = compute_style_target(rasters, domain, config.haze[domain])
    return Translator(kind=config.translator, targets=targets)


def _plan_from_file(config: RunConfig, dataset: Dataset) -> AugmentationPlan:
    """Rebuild the plan object from the plan file, recomputing the
    predicted distribution from the dataset (integrity over trust)."""
    header, jobs = read_plan_file(config.plan_path)
    by_id = dataset.by_id()
    counts = class_distribution(dataset).counts
    for job in jobs:
        record = by_id.get(job.image_id)
        if record is None:
            raise ValueError(f"plan references unknown image {job.image_id}")
        for label, _ in record.objects:
            counts[label] += job.copies
    trace = tuple(
        None if token == "inf" else Fraction(token)
        for token in header.get("objective_trace", "").split()
    )
    tolerance = Fraction(header.get("tolerance", str(config.tolerance)))
    final = trace[-1] if trace else None
    return AugmentationPlan(
        jobs=tuple(jobs),
        predicted=ClassDistribution(counts=counts),
        objective_trace=trace,
        tolerance=tolerance,
        balanced=header.get("balanced") == "true"
        if "balanced" in header
        else (final is not None and final <= tolerance),
    )


def generate(config: RunConfig) -> GenerateSummary:
    """Generate stage: run every plan job through the translator, flag
    the results, and populate the review queue."""
    dataset, pool = load_tagged_dataset(config)
    plan = _plan_from_file(config, dataset)
    by_id = dataset.by_id()

    queue_dir = config.queue_dir
    queue_dir.mkdir(parents=True, exist_ok=True)
    config.generated_dir.mkdir(parents=True, exist_ok=True)
    items_path = queue_dir / "items.jsonl"
    if not items_path.exists():
        items_path.write_text("", encoding="utf-8")
    log = DecisionLog(path=queue_dir / "decisions.log")

    existing = {item.item_id: item for item in read_items_file(items_path)}
    states = replay_log(log.records(), set(existing))
    for item_id, state in states.items():
        existing[item_id].state = state
    # heal block-severity items whose auto-rejection never reached the log
    # (crash between the item append and the log append)
    for item in existing.values():
        if item.flags.severity == SEVERITY_BLOCK and item.state == PENDING:
            log.append(item.item_id, PENDING, REJECTED, reviewer="auto")
            item.state = REJECTED

    meta = {
        "original_counts": class_distribution(dataset).counts,
        "vocabulary": list(config.vocabulary),
        "domains": list(config.domains),
        "tolerance": str(config.tolerance),
        "config_hash": config.config_hash(),
    }
    (queue_dir / "meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    work: list[tuple[AugmentationJob, int, str]] = []
    skipped = 0
    for job in plan.jobs:
        for copy in range(1, job.copies + 1):
            item_id = augmented_id(job.image_id, job.target_domain, copy)
            generated_path = config.generated_dir / f"{item_id}.png"
            if item_id in existing and generated_path.exists():
                skipped += 1
                continue
            work.append((job, copy, item_id))

    translator = (
        make_translator(config, dataset, pool) if work else Translator(kind="identity")
    )
    rasters = {
        image_id: load_raster(by_id[image_id].image_path)
        for image_id in {job.image_id for job, _, _ in work}
    }

    def run_one(task: tuple[AugmentationJob, int, str]):
        job, copy, item_id = task
        try:
            source = rasters[job.image_id]
            result = translate(translator, source, job.source_domain, job.target_domain)
            generated_path = config.generated_dir / f"{item_id}.png"
            save_raster(generated_path, result.image)
            flags = auto_flag(source, result.image, config.qc_thresholds, item_id)
            record = by_id[job.image_id]
            return ReviewItem(
                item_id=item_id,
                source_id=job.image_id,
                source_domain=job.source_domain,
                target_domain=job.target_domain,
                copy_index=copy,
                source_image_path=record.image_path,
                generated_image_path=str(generated_path),
                flags=flags,
                class_counts=record.class_counts(config.vocabulary),
            )
        except (TranslationError, OSError, ValueError) as exc:
            return (item_id, str(exc))

    failures: list[tuple[str, str]] = []
    new_items: list[ReviewItem] = []
    workers = max(1, config.generate_workers)
    with ThreadPoolExecutor(max_workers=workers) as executor:
        for outcome in executor.map(run_one, work):
            if isinstance(outcome, ReviewItem):
                new_items.append(outcome)
            else:
                failures.append(outcome)
                logger.error("generation failed for %s: %s", outcome[0], outcome[1])

    # item lines land before any auto-rejection so the log never
    # references an unknown item
    fresh = [item for item in new_items if item.item_id not in existing]
    for item in fresh:
        append_item_file(item, items_path)
    enqueue(fresh, log)
    for item in new_items:
        if item.item_id in existing:
            # regenerated file for a known item; state untouched
            continue
        existing[item.item_id] = item

    by_state = {PENDING: 0, ACCEPTED: 0, REJECTED: 0}
    for item in existing.values():
        by_state[item.state] += 1
    return GenerateSummary(
        generated=len(new_items),
        skipped=skipped,
        failures=failures,
        by_state=by_state,
    )


def run_export(
    config: RunConfig, pending_policy: str = "block"
) -> tuple[ExportManifest, BalanceReport]:
    """Export stage plus on-disk balance verification."""
    dataset = load_dataset(config.dataset_root, config.manifest, config.vocabulary)
    plan = _plan_from_file(config, dataset)
    review = ReviewQueue.load(config.queue_dir)
    manifest = export_balanced_dataset(
        dataset,
        plan,
        review,
        config.out_dir,
        config_snapshot=config.snapshot(),
        translator_kind=config.translator,
        pending_policy=pending_policy,
    )
    report = verify_balance(config.out_dir / "manifest", config.tolerance)
    return manifest, report


def run_verify(config: RunConfig) -> BalanceReport:
    return verify_balance(config.out_dir / "manifest", config.tolerance)
