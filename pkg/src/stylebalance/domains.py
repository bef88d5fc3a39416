"""Style-domain classification and per-domain image pools.

Each image is assigned to one color-style domain (default set: green,
blue, deepblue, white) by nearest-anchor matching on its mean color in
the working opponent space. Anchors are calibration data shipped in
config; a manual override file (id -> domain) takes precedence over the
automatic assignment.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import Dataset
from .raster import load_raster, mean_opponent_color, rgb_to_opponent

logger = logging.getLogger(__name__)

DEFAULT_DOMAINS = ("green", "blue", "deepblue", "white")

# RGB means calibrated on sample underwater imagery; tolerance is the
# expected within-domain spread, used only for assignment diagnostics.
DEFAULT_ANCHOR_RGB = {
    "green": (0.22, 0.42, 0.30, 0.25),
    "blue": (0.18, 0.34, 0.50, 0.25),
    "deepblue": (0.08, 0.16, 0.38, 0.25),
    "white": (0.55, 0.60, 0.62, 0.25),
}


class DomainError(Exception):
    """Classification or pool-building failure."""


@dataclass(frozen=True)
class DomainAnchor:
    """Reference point for one style domain in the working color space."""

    domain: str
    mean_color: tuple[float, float, float]
    tolerance: float

    def __post_init__(self) -> None:
        if self.tolerance <= 0:
            raise DomainError(f"anchor {self.domain}: tolerance must be > 0")

    @classmethod
    def from_rgb(
        cls, domain: str, rgb: tuple[float, float, float], tolerance: float
    ) -> "DomainAnchor":
        opp = rgb_to_opponent(np.asarray(rgb, dtype=np.float64))
        return cls(domain=domain, mean_color=tuple(opp.tolist()), tolerance=tolerance)


def default_anchors() -> list[DomainAnchor]:
    return [
        DomainAnchor.from_rgb(name, rgb[:3], rgb[3])
        for name, rgb in DEFAULT_ANCHOR_RGB.items()
    ]


@dataclass(frozen=True)
class DomainPool:
    """Partition of image ids into per-domain pools (dataset order)."""

    assignments: dict[str, str]
    pools: dict[str, tuple[str, ...]]

    def sizes(self) -> dict[str, int]:
        return {domain: len(ids) for domain, ids in self.pools.items()}


def _check_anchors(anchors: list[DomainAnchor]) -> None:
    if not anchors:
        raise DomainError("at least one anchor required")
    names = [a.domain for a in anchors]
    if len(set(names)) != len(names):
        raise DomainError(f"duplicate anchor domains: {names}")
    means = [a.mean_color for a in anchors]
    if len(set(means)) != len(means):
        raise DomainError("anchor mean colors must be pairwise distinct")


def classify_style(image: np.ndarray, anchors: list[DomainAnchor]) -> str:
    """Nearest-anchor domain for an image.

    Distance is Euclidean between the image's mean color (opponent space)
    and each anchor mean; ties go to the earlier anchor in the list. The
    result depends only on the pixel value multiset.
    """
    _check_anchors(anchors)
    if image.size == 0:
        raise DomainError("empty image")
    mean = mean_opponent_color(image)
    best = anchors[0].domain
    best_dist = float("inf")
    for anchor in anchors:
        dist = float(np.linalg.norm(mean - np.asarray(anchor.mean_color)))
        if dist < best_dist:
            best = anchor.domain
            best_dist = dist
    return best


def build_domain_pools(
    dataset: Dataset,
    anchors: list[DomainAnchor],
    overrides: dict[str, str] | None = None,
) -> DomainPool:
    """Assign every record to a domain and collect per-domain id pools.

    Pools list ids in dataset order. Apply the result to the records via
    Dataset.with_domains(pool.assignments). Override entries win over the
    automatic classification.
    """
    _check_anchors(anchors)
    overrides = overrides or {}
    domain_names = [a.domain for a in anchors]
    for image_id, domain in overrides.items():
        if domain not in domain_names:
            raise DomainError(f"override for {image_id}: unknown domain {domain!r}")

    anchor_by_domain = {a.domain: a for a in anchors}
    assignments: dict[str, str] = {}
    pools: dict[str, list[str]] = {name: [] for name in domain_names}
    out_of_tolerance = 0
    for record in dataset.records:
        if record.id in overrides:
            domain = overrides[record.id]
        else:
            try:
                image = load_raster(record.image_path)
            except (OSError, ValueError) as exc:
                raise DomainError(
                    f"record {record.id}: cannot read image {record.image_path}: {exc}"
                ) from None
            if (image.shape[0], image.shape[1]) != (record.height, record.width):
                raise DomainError(
                    f"record {record.id}: image is {image.shape[1]}x{image.shape[0]}, "
                    f"annotation says {record.width}x{record.height}"
                )
            domain = classify_style(image, anchors)
            anchor = anchor_by_domain[domain]
            dist = float(
                np.linalg.norm(
                    mean_opponent_color(image) - np.asarray(anchor.mean_color)
                )
            )
            if dist > anchor.tolerance:
                out_of_tolerance += 1
        assignments[record.id] = domain
        pools[domain].append(record.id)
    if out_of_tolerance:
        logger.warning(
            "%d of %d images farther than the anchor tolerance from their domain",
            out_of_tolerance,
            len(dataset.records),
        )
    return DomainPool(
        assignments=assignments,
        pools={name: tuple(ids) for name, ids in pools.items()},
    )


def balance_domain_pool(pool: DomainPool, seed: int) -> DomainPool:
    """Equalize pool sizes by seeded sampling without replacement.

    Every pool is truncated to the size of the smallest one; survivors
    keep their relative order. An empty domain empties all pools.
    """
    if not pool.pools:
        return pool
    k = min(len(ids) for ids in pool.pools.values())
    rng = random.Random(seed)
    balanced: dict[str, tuple[str, ...]] = {}
    for domain, ids in pool.pools.items():
        if len(ids) == k:
            balanced[domain] = ids
            continue
        keep = sorted(rng.sample(range(len(ids)), k))
        balanced[domain] = tuple(ids[i] for i in keep)
    kept_ids = {i for ids in balanced.values() for i in ids}
    assignments = {i: d for i, d in pool.assignments.items() if i in kept_ids}
    return DomainPool(assignments=assignments, pools=balanced)


def read_override_file(path: str | Path) -> dict[str, str]:
    """Read manual domain assignments: one ``image_id<TAB>domain`` per line."""
    overrides: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").split("\n"), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DomainError(f"{path}:{lineno}: expected id<TAB>domain, got {line!r}")
        overrides[parts[0]] = parts[1]
    return overrides


def read_anchor_file(path: str | Path) -> list[DomainAnchor]:
    """Read anchors: one ``domain: r g b tolerance`` entry per line."""
    anchors: list[DomainAnchor] = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").split("\n"), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if ":" not in stripped:
            raise DomainError(f"{path}:{lineno}: expected 'domain: r g b tolerance'")
        name, _, rest = stripped.partition(":")
        values = rest.split()
        if len(values) != 4:
            raise DomainError(f"{path}:{lineno}: expected 4 numbers, got {rest!r}")
        r, g, b, tolerance = (float(v) for v in values)
        anchors.append(DomainAnchor.from_rgb(name.strip(), (r, g, b), tolerance))
    if not anchors:
        raise DomainError(f"{path}: no anchors defined")
    _check_anchors(anchors)
    return anchors
