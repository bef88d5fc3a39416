"""Minority-class identification, image selection, and greedy
augmentation planning.

The planner drives the per-class instance distribution toward balance by
repeatedly picking the (selected image, target style domain) pair whose
added instance counts most reduce the imbalance objective
J = max class count / min class count, one copy at a time. Copies of an
image never target its own domain, and per (image, domain) pair they are
capped: style transfer of one image to one domain is near-deterministic,
so extra copies add no diversity.

All objective arithmetic is exact (Fractions over integer counts) so the
trace, the tie-breaks, and the resulting plan are reproducible bit for
bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .dataset import ClassDistribution, Dataset, ImageRecord
from .domains import DomainPool


class SelectionError(Exception):
    """Planner precondition failure."""


class MinorityUndefinedError(SelectionError):
    """Ratio-based minority detection impossible; an explicit class list
    must be supplied instead."""


@dataclass(frozen=True)
class MinoritySpec:
    """Vocabulary split into minority (to augment) and majority classes."""

    minority: tuple[str, ...]
    majority: tuple[str, ...]


@dataclass(frozen=True)
class SelectionScore:
    image_id: str
    minority_count: int
    majority_count: int
    score: float


@dataclass(frozen=True)
class AugmentationJob:
    image_id: str
    source_domain: str
    target_domain: str
    copies: int

    def __post_init__(self) -> None:
        if self.target_domain == self.source_domain:
            raise SelectionError(
                f"job for {self.image_id}: target domain equals source "
                f"({self.source_domain})"
            )
        if self.copies < 1:
            raise SelectionError(f"job for {self.image_id}: copies must be >= 1")


@dataclass(frozen=True)
class AugmentationPlan:
    """Jobs plus the predicted post-augmentation distribution.

    objective_trace holds J before any step and after each accepted step;
    None stands for an infinite ratio (some class still at zero).
    """

    jobs: tuple[AugmentationJob, ...]
    predicted: ClassDistribution
    objective_trace: tuple[Fraction | None, ...] = field(hash=False)
    tolerance: Fraction
    balanced: bool

    @property
    def total_copies(self) -> int:
        return sum(job.copies for job in self.jobs)


def identify_minority_classes(
    dist: ClassDistribution, threshold_fraction: Fraction | float
) -> MinoritySpec:
    """Classes with count below threshold_fraction * max count.

    Requires every class to have at least one instance; a zero-count
    class makes the ratio criterion meaningless and the caller must
    supply an explicit minority list.
    """
    threshold = Fraction(str(threshold_fraction)) if not isinstance(
        threshold_fraction, Fraction
    ) else threshold_fraction
    if not (0 < threshold <= 1):
        raise SelectionError(f"threshold_fraction must be in (0, 1], got {threshold}")
    if not dist.counts:
        raise MinorityUndefinedError("empty distribution; supply an explicit list")
    zero = [name for name, count in dist.counts.items() if count == 0]
    if zero:
        raise MinorityUndefinedError(
            f"classes with zero instances ({', '.join(zero)}); "
            "supply an explicit minority list"
        )
    peak = max(dist.counts.values())
    minority = tuple(
        name for name, count in dist.counts.items() if count < threshold * peak
    )
    if not minority or len(minority) == len(dist.counts):
        raise MinorityUndefinedError(
            "threshold produced no usable minority split; "
            "supply an explicit minority list"
        )
    majority = tuple(name for name in dist.counts if name not in minority)
    return MinoritySpec(minority=minority, majority=majority)


def explicit_minority_spec(
    vocabulary: tuple[str, ...], minority: tuple[str, ...]
) -> MinoritySpec:
    """Build a MinoritySpec from a user-provided class list."""
    unknown = [name for name in minority if name not in vocabulary]
    if unknown:
        raise SelectionError(f"minority classes not in vocabulary: {unknown}")
    if not minority or len(set(minority)) == len(vocabulary):
        raise SelectionError("minority must be a non-empty strict subset of the vocabulary")
    majority = tuple(name for name in vocabulary if name not in minority)
    return MinoritySpec(minority=tuple(minority), majority=majority)


def score_image(record: ImageRecord, spec: MinoritySpec, lam: float = 1.0) -> SelectionScore:
    """minority instances minus lam * majority instances."""
    if lam < 0:
        raise SelectionError(f"lambda must be >= 0, got {lam}")
    minority = set(spec.minority)
    minority_count = sum(1 for label, _ in record.objects if label in minority)
    majority_count = len(record.objects) - minority_count
    return SelectionScore(
        image_id=record.id,
        minority_count=minority_count,
        majority_count=majority_count,
        score=minority_count - lam * majority_count,
    )


def select_images(dataset: Dataset, spec: MinoritySpec, lam: float = 1.0) -> list[str]:
    """Ids of minority-bearing images with positive score, best first.

    Ties are broken by ascending id; images without minority instances
    are never selected.
    """
    scored = [score_image(record, spec, lam) for record in dataset.records]
    keep = [s for s in scored if s.score > 0 and s.minority_count >= 1]
    keep.sort(key=lambda s: (-s.score, s.image_id))
    return [s.image_id for s in keep]


def _ratio(counts: dict[str, int]) -> Fraction | None:
    """max/min instance-count ratio.

    All-zero counts are trivially balanced (ratio 1); a zero-count class
    alongside a populated one yields None, meaning infinite.
    """
    if not counts:
        return Fraction(1)
    lo = min(counts.values())
    hi = max(counts.values())
    if hi == 0:
        return Fraction(1)
    if lo == 0:
        return None
    return Fraction(hi, lo)


def _ratio_key(ratio: Fraction | None) -> tuple[int, Fraction]:
    # None encodes an infinite ratio (some class still at zero)
    if ratio is None:
        return (1, Fraction(0))
    return (0, ratio)


def plan_augmentation(
    dataset: Dataset,
    selected: list[str],
    pools: DomainPool,
    tolerance: Fraction | float = Fraction(5, 4),
    max_copies_per_pair: int = 3,
    max_total_jobs: int = 10000,
) -> AugmentationPlan:
    """Greedy one-copy-at-a-time balance plan.

    Each step adds one copy of the selected image whose instance counts
    most reduce J = max/min over the predicted distribution, requiring a
    strict reduction. Ties go to the lower image id; the copy's target
    domain is the eligible one (not the source, below the per-pair cap)
    with the fewest copies so far, then by configured domain order, which
    spreads copies round-robin across domains. The loop stops when
    J <= tolerance, no pair strictly reduces J, or max_total_jobs is
    reached. An unreachable balance is reported via balanced=False, not
    an exception.
    """
    tolerance = Fraction(str(tolerance)) if not isinstance(tolerance, Fraction) else tolerance
    if tolerance < 1:
        raise SelectionError(f"tolerance must be >= 1, got {tolerance}")
    if max_copies_per_pair < 1:
        raise SelectionError("max_copies_per_pair must be >= 1")

    by_id = dataset.by_id()
    unknown = [image_id for image_id in selected if image_id not in by_id]
    if unknown:
        raise SelectionError(f"selected ids not in dataset: {unknown}")
    domain_order = list(pools.pools.keys())
    source_domain: dict[str, str] = {}
    for image_id in selected:
        domain = pools.assignments.get(image_id) or by_id[image_id].domain
        if domain is None:
            raise SelectionError(f"selected image {image_id} has no domain assignment")
        source_domain[image_id] = domain

    vocabulary = dataset.class_vocabulary
    added_counts = {
        image_id: by_id[image_id].class_counts(vocabulary) for image_id in selected
    }
    counts = {name: 0 for name in vocabulary}
    for record in dataset.records:
        for label, _ in record.objects:
            counts[label] += 1

    # copies already granted per (image, target domain)
    pair_copies: dict[tuple[str, str], int] = {}
    trace: list[Fraction | None] = [_ratio(counts)]
    ordered_pairs: list[tuple[str, str]] = []

    def eligible_domains(image_id: str) -> list[str]:
        return [
            d
            for d in domain_order
            if d != source_domain[image_id]
            and pair_copies.get((image_id, d), 0) < max_copies_per_pair
        ]

    steps = 0
    while steps < max_total_jobs:
        current = trace[-1]
        if current is not None and current <= tolerance:
            break
        best_id: str | None = None
        best_ratio: Fraction | None = None
        for image_id in sorted(selected):
            if not eligible_domains(image_id):
                continue
            candidate = dict(counts)
            for name, n in added_counts[image_id].items():
                candidate[name] += n
            ratio = _ratio(candidate)
            if _ratio_key(ratio) >= _ratio_key(current):
                continue
            if best_id is None or _ratio_key(ratio) < _ratio_key(best_ratio):
                best_id = image_id
                best_ratio = ratio
        if best_id is None:
            break
        domains = eligible_domains(best_id)
        domains.sort(
            key=lambda d: (pair_copies.get((best_id, d), 0), domain_order.index(d))
        )
        target = domains[0]
        pair = (best_id, target)
        if pair not in pair_copies:
            ordered_pairs.append(pair)
        pair_copies[pair] = pair_copies.get(pair, 0) + 1
        for name, n in added_counts[best_id].items():
            counts[name] += n
        trace.append(best_ratio)
        steps += 1

    jobs = tuple(
        AugmentationJob(
            image_id=image_id,
            source_domain=source_domain[image_id],
            target_domain=target,
            copies=pair_copies[(image_id, target)],
        )
        for image_id, target in ordered_pairs
    )
    final = trace[-1]
    return AugmentationPlan(
        jobs=jobs,
        predicted=ClassDistribution(counts=counts),
        objective_trace=tuple(trace),
        tolerance=tolerance,
        balanced=final is not None and final <= tolerance,
    )


def write_plan_file(
    plan: AugmentationPlan,
    path: str | Path,
    *,
    lam: float,
    seed: int,
    config_hash: str,
) -> None:
    """Write a plan: key-value header, '---' separator, one job per line
    (image_id, source domain, target domain, copies; tab-separated)."""
    trace = " ".join("inf" if r is None else str(r) for r in plan.objective_trace)
    predicted = " ".join(f"{name}={count}" for name, count in plan.predicted.counts.items())
    lines = [
        f"tolerance: {plan.tolerance}",
        f"lambda: {lam}",
        f"seed: {seed}",
        f"config_hash: {config_hash}",
        f"balanced: {'true' if plan.balanced else 'false'}",
        f"objective_trace: {trace}",
        f"predicted: {predicted}",
        "---",
    ]
    lines.extend(
        f"{job.image_id}\t{job.source_domain}\t{job.target_domain}\t{job.copies}"
        for job in plan.jobs
    )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_plan_file(path: str | Path) -> tuple[dict[str, str], list[AugmentationJob]]:
    """Read a plan file back as (header fields, jobs)."""
    header: dict[str, str] = {}
    jobs: list[AugmentationJob] = []
    in_header = True
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").split("\n"), 1):
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
        if len(parts) != 4:
            raise SelectionError(f"{path}:{lineno}: malformed job line {line!r}")
        jobs.append(
            AugmentationJob(
                image_id=parts[0],
                source_domain=parts[1],
                target_domain=parts[2],
                copies=int(parts[3]),
            )
        )
    return header, jobs
