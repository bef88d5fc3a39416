"""Quality control for generated images: automatic artifact flagging and
the human accept/reject review that gates export.

Every generated image gets a QCFlags record (clipping level, structural
similarity to its source, severity). Severity "block" pre-rejects the
item; everything else waits for a human verdict. All state changes go
through an append-only decision log: replaying the log from an empty
(all-pending) state reproduces the live state exactly, which is what
makes crash recovery and audits trivial. The log is never rewritten.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .raster import block_mean, luminance

PENDING = "pending"
ACCEPTED = "accepted"
REJECTED = "rejected"
STATES = (PENDING, ACCEPTED, REJECTED)

SEVERITY_NONE = "none"
SEVERITY_WARN = "warn"
SEVERITY_BLOCK = "block"

# legal direct transitions; anything else must go through pending
_TRANSITIONS = {
    (PENDING, ACCEPTED),
    (PENDING, REJECTED),
    (ACCEPTED, PENDING),
    (REJECTED, PENDING),
}


class ReviewError(Exception):
    """Unknown item or illegal state transition."""


class ConflictError(ReviewError):
    """Stale prior_state: somebody else changed the item first."""


@dataclass(frozen=True)
class QCThresholds:
    warn_clip: float = 0.10
    block_clip: float = 0.25
    warn_structure: float = 0.8
    block_structure: float = 0.6

    def __post_init__(self) -> None:
        if self.warn_clip > self.block_clip:
            raise ValueError("warn clip threshold must be <= block threshold")
        if self.warn_structure < self.block_structure:
            raise ValueError("warn structure threshold must be >= block threshold")


@dataclass(frozen=True)
class QCFlags:
    item_id: str
    clipped_fraction: float
    structure_score: float
    severity: str


@dataclass
class ReviewItem:
    item_id: str
    source_id: str
    source_domain: str
    target_domain: str
    copy_index: int
    source_image_path: str
    generated_image_path: str
    flags: QCFlags
    class_counts: dict[str, int]
    state: str = PENDING


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    """Correlation with explicit degenerate handling: two constant planes
    correlate perfectly, one constant plane not at all."""
    a = a.ravel().astype(np.float64)
    b = b.ravel().astype(np.float64)
    da = a - a.mean()
    db = b - b.mean()
    na = float(np.sqrt((da**2).sum()))
    nb = float(np.sqrt((db**2).sum()))
    if na == 0.0 and nb == 0.0:
        return 1.0
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float((da * db).sum() / (na * nb))


def auto_flag(
    source: np.ndarray,
    generated: np.ndarray,
    thresholds: QCThresholds = QCThresholds(),
    item_id: str = "",
) -> QCFlags:
    """Heuristic artifact screen for one generated image.

    clipped_fraction counts generated samples sitting exactly at 0 or 1;
    structure_score is the Pearson correlation of 32x32 block-mean
    luminance between source and generated, mapped to [0, 1].
    """
    if source.shape != generated.shape:
        raise ValueError(
            f"dimension mismatch: source {source.shape} vs generated {generated.shape}"
        )
    clipped = float(np.mean((generated == 0.0) | (generated == 1.0)))
    r = _pearson(block_mean(luminance(source)), block_mean(luminance(generated)))
    structure = min(max((r + 1.0) / 2.0, 0.0), 1.0)
    if clipped > thresholds.block_clip or structure < thresholds.block_structure:
        severity = SEVERITY_BLOCK
    elif clipped > thresholds.warn_clip or structure < thresholds.warn_structure:
        severity = SEVERITY_WARN
    else:
        severity = SEVERITY_NONE
    return QCFlags(
        item_id=item_id,
        clipped_fraction=clipped,
        structure_score=structure,
        severity=severity,
    )


@dataclass
class DecisionLog:
    """Append-only line-delimited decision records, fsynced per append."""

    path: Path
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def append(
        self, item_id: str, prior_state: str, new_state: str, reviewer: str
    ) -> dict:
        record = {
            "ts": datetime.now(timezone.utc).isoformat(),
            "item_id": item_id,
            "prior_state": prior_state,
            "new_state": new_state,
            "reviewer": reviewer,
        }
        line = json.dumps(record, sort_keys=True) + "\n"
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as handle:
                handle.write(line)
                handle.flush()
                os.fsync(handle.fileno())
        return record

    def records(self) -> list[dict]:
        """All complete records; a torn trailing line (partial write from
        a crash) is ignored."""
        if not self.path.exists():
            return []
        records = []
        lines = self.path.read_text(encoding="utf-8").split("\n")
        for index, line in enumerate(lines):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError:
                if index == len(lines) - 1:
                    break
                raise ReviewError(f"{self.path}:{index + 1}: corrupt log line")
        return records


def replay_log(records: list[dict], item_ids: set[str]) -> dict[str, str]:
    """Fold decision records over an all-pending initial state.

    Validates every transition; a legal log therefore always replays to a
    legal state, whatever prefix of it survived a crash.
    """
    states = {item_id: PENDING for item_id in item_ids}
    for record in records:
        item_id = record["item_id"]
        if item_id not in states:
            raise ReviewError(f"log references unknown item {item_id}")
        prior = record["prior_state"]
        new = record["new_state"]
        if states[item_id] != prior:
            raise ReviewError(
                f"log corrupt: item {item_id} was {states[item_id]}, "
                f"record claims {prior}"
            )
        if (prior, new) not in _TRANSITIONS:
            raise ReviewError(f"log corrupt: illegal transition {prior} -> {new}")
        states[item_id] = new
    return states


def enqueue(items: list[ReviewItem], log: DecisionLog) -> list[ReviewItem]:
    """Register freshly generated items for review.

    Items arrive pending; severity-block items are immediately rejected in
    the log under reviewer "auto" (a human can revert them later).
    """
    for item in items:
        item.state = PENDING
        if item.flags.severity == SEVERITY_BLOCK:
            log.append(item.item_id, PENDING, REJECTED, reviewer="auto")
            item.state = REJECTED
    return items


def record_decision(
    log: DecisionLog,
    items: dict[str, ReviewItem],
    item_id: str,
    new_state: str,
    reviewer: str,
    expected_prior: str | None = None,
) -> ReviewItem:
    """Apply one review decision.

    Re-submitting the current state is a no-op with no log append. A
    wrong expected_prior raises ConflictError (stale client); an illegal
    transition raises ReviewError.
    """
    if new_state not in STATES:
        raise ReviewError(f"unknown state {new_state!r}")
    item = items.get(item_id)
    if item is None:
        raise ReviewError(f"unknown item {item_id!r}")
    if expected_prior is not None and expected_prior != item.state:
        raise ConflictError(
            f"item {item_id} is {item.state}, not {expected_prior}"
        )
    if new_state == item.state:
        return item
    if (item.state, new_state) not in _TRANSITIONS:
        raise ReviewError(
            f"illegal transition {item.state} -> {new_state} for {item_id}"
        )
    log.append(item_id, item.state, new_state, reviewer)
    item.state = new_state
    return item


def review_summary(
    items: list[ReviewItem], original_counts: dict[str, int]
) -> tuple[dict[str, int], dict[str, int]]:
    """Counts by state plus the predicted distribution over surviving
    (accepted or still pending) copies."""
    by_state = {PENDING: 0, ACCEPTED: 0, REJECTED: 0}
    predicted = dict(original_counts)
    for item in items:
        by_state[item.state] += 1
        if item.state != REJECTED:
            for name, count in item.class_counts.items():
                predicted[name] = predicted.get(name, 0) + count
    return by_state, predicted


def _item_dict(item: ReviewItem) -> dict:
    return {
        "item_id": item.item_id,
        "source_id": item.source_id,
        "source_domain": item.source_domain,
        "target_domain": item.target_domain,
        "copy_index": item.copy_index,
        "source_image_path": item.source_image_path,
        "generated_image_path": item.generated_image_path,
        "clipped_fraction": item.flags.clipped_fraction,
        "structure_score": item.flags.structure_score,
        "severity": item.flags.severity,
        "class_counts": item.class_counts,
    }


def append_item_file(item: ReviewItem, path: str | Path) -> None:
    """Append one item's metadata line (state excluded: the log owns state)."""
    with open(path, "a", encoding="utf-8") as handle:
        handle.write(json.dumps(_item_dict(item), sort_keys=True) + "\n")


def read_items_file(path: str | Path) -> list[ReviewItem]:
    items = []
    text = Path(path).read_text(encoding="utf-8")
    for line in text.split("\n"):
        if not line.strip():
            continue
        data = json.loads(line)
        items.append(
            ReviewItem(
                item_id=data["item_id"],
                source_id=data["source_id"],
                source_domain=data["source_domain"],
                target_domain=data["target_domain"],
                copy_index=data["copy_index"],
                source_image_path=data["source_image_path"],
                generated_image_path=data["generated_image_path"],
                flags=QCFlags(
                    item_id=data["item_id"],
                    clipped_fraction=data["clipped_fraction"],
                    structure_score=data["structure_score"],
                    severity=data["severity"],
                ),
                class_counts=data["class_counts"],
            )
        )
    return items


@dataclass
class ReviewQueue:
    """Items plus their decision log, with states materialized by replay."""

    items: dict[str, ReviewItem]
    log: DecisionLog
    original_counts: dict[str, int]
    _write_lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @classmethod
    def load(cls, queue_dir: str | Path) -> "ReviewQueue":
        queue_dir = Path(queue_dir)
        items_path = queue_dir / "items.jsonl"
        meta_path = queue_dir / "meta.json"
        log = DecisionLog(path=queue_dir / "decisions.log")
        items = {i.item_id: i for i in read_items_file(items_path)}
        states = replay_log(log.records(), set(items))
        for item_id, state in states.items():
            items[item_id].state = state
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        return cls(items=items, log=log, original_counts=meta["original_counts"])

    def decide(
        self, item_id: str, new_state: str, reviewer: str, expected_prior: str | None
    ) -> ReviewItem:
        with self._write_lock:
            return record_decision(
                self.log, self.items, item_id, new_state, reviewer, expected_prior
            )

    def summary(self) -> tuple[dict[str, int], dict[str, int]]:
        return review_summary(list(self.items.values()), self.original_counts)
