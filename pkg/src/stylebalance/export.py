"""Materialize the balanced dataset: originals plus accepted augmented
copies, with geometry-preserved annotations and a provenance manifest.

Export is all-or-nothing: everything is staged into a temporary sibling
directory, validated, recounted from the files actually written, and
atomically renamed into place. A half-written dataset is worse than
none. Rejected and pending items never reach the output; rejection
removes an item from export but its generated file stays behind for
audit.
"""

from __future__ import annotations

import shutil
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path

from PIL import Image

from .dataset import (
    ClassDistribution,
    Dataset,
    DatasetError,
    parse_voc_annotation,
    serialize_voc_annotation,
)
from .qc import ACCEPTED, PENDING, REJECTED, ReviewQueue
from .selection import AugmentationPlan

ORIGIN_ORIGINAL = "original"
ORIGIN_AUGMENTED = "augmented"


class ExportError(Exception):
    """Export precondition or integrity failure."""


class IntegrityError(ExportError):
    """Manifest and on-disk files disagree."""


@dataclass(frozen=True)
class ManifestEntry:
    image_path: str
    annotation_path: str
    origin: str
    source_id: str | None = None
    source_domain: str | None = None
    target_domain: str | None = None
    translator: str | None = None
    copy_index: int | None = None


@dataclass(frozen=True)
class ExportManifest:
    entries: tuple[ManifestEntry, ...]
    final_distribution: ClassDistribution
    config_snapshot: dict[str, str]


@dataclass(frozen=True)
class BalanceReport:
    balanced: bool
    ratio: Fraction | None
    counts: dict[str, int]


def augmented_id(source_id: str, target_domain: str, copy_index: int) -> str:
    return f"{source_id}__{target_domain}__{copy_index}"


def export_balanced_dataset(
    dataset: Dataset,
    plan: AugmentationPlan,
    review: ReviewQueue,
    out_dir: str | Path,
    config_snapshot: dict[str, str],
    translator_kind: str,
    pending_policy: str = "block",
) -> ExportManifest:
    """Write originals plus accepted copies under out_dir.

    Every plan copy must have a reviewed queue item; pending items abort
    the export unless pending_policy is "accept" or "reject". Augmented
    annotations reuse the source record's boxes verbatim under a fresh id
    "{source_id}__{target_domain}__{copy}". The reported distribution is
    recounted from the files written, not predicted.
    """
    out_dir = Path(out_dir)
    if out_dir.exists() and any(out_dir.iterdir()):
        raise ExportError(f"output directory {out_dir} is not empty")
    if pending_policy not in ("block", "accept", "reject"):
        raise ExportError(f"unknown pending policy {pending_policy!r}")

    by_id = dataset.by_id()
    expected = []
    for job in plan.jobs:
        for copy in range(1, job.copies + 1):
            expected.append((job, copy, augmented_id(job.image_id, job.target_domain, copy)))
    missing = [item_id for _, _, item_id in expected if item_id not in review.items]
    if missing:
        raise ExportError(
            f"{len(missing)} plan copies were never generated/reviewed: "
            f"{missing[:5]}{'...' if len(missing) > 5 else ''}"
        )

    pending = [
        item_id
        for _, _, item_id in expected
        if review.items[item_id].state == PENDING
    ]
    if pending and pending_policy == "block":
        raise ExportError(
            f"{len(pending)} items still pending review; "
            "finish the review or pass an explicit pending policy"
        )

    def effective_state(item_id: str) -> str:
        state = review.items[item_id].state
        if state == PENDING:
            return ACCEPTED if pending_policy == "accept" else REJECTED
        return state

    staging = out_dir.parent / (out_dir.name + ".staging")
    if staging.exists():
        shutil.rmtree(staging)
    (staging / "images").mkdir(parents=True)
    (staging / "annotations").mkdir(parents=True)

    try:
        entries: list[ManifestEntry] = []
        for record in dataset.records:
            ext = Path(record.image_path).suffix or ".png"
            image_rel = f"images/{record.id}{ext}"
            annotation_rel = f"annotations/{record.id}.xml"
            shutil.copyfile(record.image_path, staging / image_rel)
            out_record = replace(record, image_path=f"{record.id}{ext}")
            (staging / annotation_rel).write_bytes(serialize_voc_annotation(out_record))
            entries.append(
                ManifestEntry(
                    image_path=image_rel,
                    annotation_path=annotation_rel,
                    origin=ORIGIN_ORIGINAL,
                )
            )

        existing_ids = set(by_id)
        for job, copy, item_id in expected:
            if effective_state(item_id) != ACCEPTED:
                continue
            if item_id in existing_ids:
                raise ExportError(f"augmented id collides with existing record: {item_id}")
            existing_ids.add(item_id)
            item = review.items[item_id]
            generated = Path(item.generated_image_path)
            if not generated.exists():
                raise ExportError(f"accepted item {item_id} has no generated file")
            source = by_id[job.image_id]
            image_rel = f"images/{item_id}.png"
            annotation_rel = f"annotations/{item_id}.xml"
            shutil.copyfile(generated, staging / image_rel)
            aug_record = replace(
                source,
                id=item_id,
                image_path=f"{item_id}.png",
                domain=job.target_domain,
                annotation_path=None,
            )
            (staging / annotation_rel).write_bytes(serialize_voc_annotation(aug_record))
            entries.append(
                ManifestEntry(
                    image_path=image_rel,
                    annotation_path=annotation_rel,
                    origin=ORIGIN_AUGMENTED,
                    source_id=job.image_id,
                    source_domain=job.source_domain,
                    target_domain=job.target_domain,
                    translator=translator_kind,
                    copy_index=copy,
                )
            )

        entries.sort(key=lambda e: e.image_path)
        final = _recount(staging, entries, dataset.class_vocabulary)
        manifest = ExportManifest(
            entries=tuple(entries),
            final_distribution=final,
            config_snapshot=config_snapshot,
        )
        _write_manifest_file(manifest, staging / "manifest")
    except Exception:
        shutil.rmtree(staging, ignore_errors=True)
        raise

    if out_dir.exists():
        out_dir.rmdir()
    staging.replace(out_dir)
    return manifest


def _recount(
    root: Path, entries: list[ManifestEntry], vocabulary: tuple[str, ...]
) -> ClassDistribution:
    """Re-parse every written annotation, validate against the written
    image, and recount the class distribution from disk."""
    counts = {name: 0 for name in vocabulary}
    for entry in entries:
        annotation_path = root / entry.annotation_path
        image_path = root / entry.image_path
        try:
            record = parse_voc_annotation(annotation_path.read_bytes(), vocabulary)
        except DatasetError as exc:
            raise ExportError(f"written annotation {annotation_path} invalid: {exc}")
        with Image.open(image_path) as img:
            if img.size != (record.width, record.height):
                raise ExportError(
                    f"{entry.image_path}: file is {img.size[0]}x{img.size[1]}, "
                    f"annotation says {record.width}x{record.height}"
                )
        for label, _ in record.objects:
            counts[label] += 1
    return ClassDistribution(counts=counts)


def _write_manifest_file(manifest: ExportManifest, path: Path) -> None:
    lines = ["format: stylebalance-export/1"]
    dist = " ".join(
        f"{name}={count}" for name, count in manifest.final_distribution.counts.items()
    )
    lines.append(f"final_distribution: {dist}")
    lines.append(f"entries: {len(manifest.entries)}")
    for key in sorted(manifest.config_snapshot):
        lines.append(f"config.{key}: {manifest.config_snapshot[key]}")
    lines.append("---")
    for entry in manifest.entries:
        provenance = (
            f"{entry.source_id}\t{entry.source_domain}\t{entry.target_domain}"
            f"\t{entry.translator}\t{entry.copy_index}"
            if entry.origin == ORIGIN_AUGMENTED
            else "-\t-\t-\t-\t-"
        )
        lines.append(
            f"{entry.image_path}\t{entry.annotation_path}\t{entry.origin}\t{provenance}"
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest_file(path: str | Path) -> ExportManifest:
    path = Path(path)
    header: dict[str, str] = {}
    entries: list[ManifestEntry] = []
    in_header = True
    for lineno, line in enumerate(path.read_text(encoding="utf-8").split("\n"), 1):
        if not line.strip():
            continue
        if in_header:
            if line.strip() == "---":
                in_header = False
                continue
            key, _, value = line.partition(":")
            header[key.strip()] = value.strip()
            continue
        parts = line.split("\t")
        if len(parts) != 8:
            raise IntegrityError(f"{path}:{lineno}: malformed entry line")
        image_path, annotation_path, origin = parts[0], parts[1], parts[2]
        if origin == ORIGIN_AUGMENTED:
            entries.append(
                ManifestEntry(
                    image_path=image_path,
                    annotation_path=annotation_path,
                    origin=origin,
                    source_id=parts[3],
                    source_domain=parts[4],
                    target_domain=parts[5],
                    translator=parts[6],
                    copy_index=int(parts[7]),
                )
            )
        else:
            entries.append(
                ManifestEntry(
                    image_path=image_path,
                    annotation_path=annotation_path,
                    origin=origin,
                )
            )
    counts: dict[str, int] = {}
    for pair in header.get("final_distribution", "").split():
        name, _, value = pair.partition("=")
        counts[name] = int(value)
    config = {
        key[len("config.") :]: value
        for key, value in header.items()
        if key.startswith("config.")
    }
    return ExportManifest(
        entries=tuple(entries),
        final_distribution=ClassDistribution(counts=counts),
        config_snapshot=config,
    )


def verify_balance(
    manifest_path: str | Path, tolerance: Fraction | float
) -> BalanceReport:
    """Recount the exported dataset from disk and compare to tolerance.

    Read-only; manifest entries referencing missing files raise
    IntegrityError listing every offender.
    """
    tolerance = Fraction(str(tolerance)) if not isinstance(tolerance, Fraction) else tolerance
    manifest_path = Path(manifest_path)
    root = manifest_path.parent
    manifest = read_manifest_file(manifest_path)
    missing = [
        rel
        for entry in manifest.entries
        for rel in (entry.image_path, entry.annotation_path)
        if not (root / rel).exists()
    ]
    if missing:
        raise IntegrityError(f"manifest references missing files: {missing}")
    vocabulary = tuple(manifest.final_distribution.counts.keys())
    recount = _recount(root, list(manifest.entries), vocabulary)
    if recount.counts != manifest.final_distribution.counts:
        raise IntegrityError(
            f"recount {recount.counts} disagrees with manifest "
            f"{manifest.final_distribution.counts}"
        )
    ratio = recount.imbalance_ratio
    return BalanceReport(
        balanced=ratio is not None and ratio <= tolerance,
        ratio=ratio,
        counts=recount.counts,
    )
