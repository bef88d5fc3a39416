"""Box-annotated detection datasets: VOC-style XML parsing, class
statistics, and deterministic train/test splitting.

Datasets arrive as a directory of images, a sibling directory of VOC XML
annotation files, and a manifest text file pairing them (one
``image_relpath<TAB>xml_relpath`` per line). Unknown class names are a
hard error; silently dropping objects would corrupt the balance
accounting downstream.

Box coordinates in the XML are VOC-style 1-based inclusive. On ingest
they are converted to 0-based half-open integer ranges (xmin..xmax
exclusive), which removes the one-pixel ambiguity from width/area
computations; serialization converts back. Degenerate boxes (document
xmin >= xmax or ymin >= ymax) are rejected at parse time.
"""

from __future__ import annotations

import random
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

DEFAULT_VOCABULARY = ("seacucumber", "seaurchin", "scallop", "starfish")


class DatasetError(Exception):
    """Base for dataset ingest/validation failures."""


class AnnotationParseError(DatasetError):
    """Malformed or structurally incomplete annotation document."""


class VocabularyError(DatasetError):
    """Object label not in the configured class vocabulary."""


class GeometryError(DatasetError):
    """Bounding box violating its geometric invariants."""


class ManifestError(DatasetError):
    """Malformed manifest line or unreadable referenced file."""


@dataclass(frozen=True)
class BoundingBox:
    """Half-open integer pixel range, origin top-left."""

    xmin: int
    ymin: int
    xmax: int
    ymax: int

    def validate(self, width: int, height: int, context: str = "") -> None:
        where = f" ({context})" if context else ""
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise GeometryError(f"degenerate box {self.as_tuple()}{where}")
        if self.xmin < 0 or self.ymin < 0:
            raise GeometryError(f"box {self.as_tuple()} has negative origin{where}")
        if self.xmax > width or self.ymax > height:
            raise GeometryError(
                f"box {self.as_tuple()} exceeds image size {width}x{height}{where}"
            )

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.xmin, self.ymin, self.xmax, self.ymax)


@dataclass(frozen=True)
class ImageRecord:
    """One image with its labeled boxes.

    ``domain`` is a pipeline-side style tag, not part of the interchange
    format. ``annotation_path`` remembers where the record was loaded
    from, when it came from disk.
    """

    id: str
    image_path: str
    width: int
    height: int
    objects: tuple[tuple[str, BoundingBox], ...]
    domain: str | None = None
    annotation_path: str | None = None

    def class_counts(self, vocabulary: tuple[str, ...]) -> dict[str, int]:
        counts = {name: 0 for name in vocabulary}
        for label, _ in self.objects:
            counts[label] += 1
        return counts


@dataclass(frozen=True)
class Dataset:
    records: tuple[ImageRecord, ...]
    class_vocabulary: tuple[str, ...]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        vocab = set(self.class_vocabulary)
        for record in self.records:
            if record.id in seen:
                raise DatasetError(f"duplicate record id: {record.id}")
            seen.add(record.id)
            for label, _ in record.objects:
                if label not in vocab:
                    raise VocabularyError(
                        f"record {record.id}: label {label!r} not in vocabulary"
                    )

    def __len__(self) -> int:
        return len(self.records)

    def by_id(self) -> dict[str, ImageRecord]:
        return {r.id: r for r in self.records}

    def with_domains(self, assignments: dict[str, str]) -> "Dataset":
        """New dataset with per-record style-domain tags applied."""
        tagged = tuple(
            replace(r, domain=assignments.get(r.id, r.domain)) for r in self.records
        )
        return Dataset(records=tagged, class_vocabulary=self.class_vocabulary)


@dataclass(frozen=True)
class ClassDistribution:
    """Per-class instance counts over a dataset."""

    counts: dict[str, int] = field(hash=False)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def imbalance_ratio(self) -> Fraction | None:
        """max count / min count; undefined (None) when any class is empty."""
        if not self.counts:
            return None
        lo = min(self.counts.values())
        hi = max(self.counts.values())
        if lo == 0:
            return None
        return Fraction(hi, lo)


def _byte_offset(document: bytes, line: int, column: int) -> int:
    lines = document.splitlines(keepends=True)
    return sum(len(l) for l in lines[: line - 1]) + column


def _int_text(element: ET.Element, tag: str, context: str) -> int:
    node = element.find(tag)
    if node is None or node.text is None:
        raise AnnotationParseError(f"missing <{tag}> in {context}")
    try:
        return int(node.text.strip())
    except ValueError:
        raise AnnotationParseError(
            f"non-integer <{tag}> value {node.text!r} in {context}"
        ) from None


def parse_voc_annotation(
    xml_document: bytes, vocabulary: tuple[str, ...] = DEFAULT_VOCABULARY
) -> ImageRecord:
    """Parse one VOC-style XML document into an ImageRecord.

    The record id is the filename stem. Object order follows document
    order. Raises AnnotationParseError (with byte offset for malformed
    XML), VocabularyError for unknown class names, and GeometryError for
    boxes violating their invariants.
    """
    try:
        root = ET.fromstring(xml_document)
    except ET.ParseError as exc:
        line, column = exc.position
        offset = _byte_offset(xml_document, line, column)
        raise AnnotationParseError(f"malformed XML at byte {offset}: {exc}") from None

    filename_node = root.find("filename")
    if filename_node is None or not (filename_node.text or "").strip():
        raise AnnotationParseError("missing <filename>")
    filename = filename_node.text.strip()
    record_id = Path(filename).stem

    size = root.find("size")
    if size is None:
        raise AnnotationParseError(f"missing <size> in {record_id}")
    width = _int_text(size, "width", record_id)
    height = _int_text(size, "height", record_id)
    if width <= 0 or height <= 0:
        raise GeometryError(f"record {record_id}: non-positive size {width}x{height}")

    vocab = set(vocabulary)
    objects: list[tuple[str, BoundingBox]] = []
    for index, obj in enumerate(root.findall("object")):
        name_node = obj.find("name")
        if name_node is None or not (name_node.text or "").strip():
            raise AnnotationParseError(f"object {index} of {record_id} has no <name>")
        label = name_node.text.strip()
        if label not in vocab:
            raise VocabularyError(
                f"record {record_id}, object {index}: unknown class {label!r}"
            )
        bnd = obj.find("bndbox")
        if bnd is None:
            raise AnnotationParseError(f"object {index} of {record_id} has no <bndbox>")
        context = f"object {index} of {record_id}"
        xmin = _int_text(bnd, "xmin", context)
        ymin = _int_text(bnd, "ymin", context)
        xmax = _int_text(bnd, "xmax", context)
        ymax = _int_text(bnd, "ymax", context)
        if xmin >= xmax or ymin >= ymax:
            raise GeometryError(
                f"record {record_id}, box {index}: degenerate document box "
                f"({xmin},{ymin},{xmax},{ymax})"
            )
        box = BoundingBox(xmin=xmin - 1, ymin=ymin - 1, xmax=xmax, ymax=ymax)
        try:
            box.validate(width, height)
        except GeometryError as exc:
            raise GeometryError(f"record {record_id}, box {index}: {exc}") from None
        objects.append((label, box))

    return ImageRecord(
        id=record_id,
        image_path=filename,
        width=width,
        height=height,
        objects=tuple(objects),
    )


def serialize_voc_annotation(record: ImageRecord) -> bytes:
    """Render a record back to VOC XML with stable field order.

    Identical records serialize to byte-identical documents;
    parse(serialize(r)) reproduces r (domain tags excluded, they are not
    part of the format).
    """
    lines = [
        "<annotation>",
        f"  <filename>{record.image_path}</filename>",
        "  <size>",
        f"    <width>{record.width}</width>",
        f"    <height>{record.height}</height>",
        "    <depth>3</depth>",
        "  </size>",
    ]
    for label, box in record.objects:
        lines.extend(
            [
                "  <object>",
                f"    <name>{label}</name>",
                "    <bndbox>",
                f"      <xmin>{box.xmin + 1}</xmin>",
                f"      <ymin>{box.ymin + 1}</ymin>",
                f"      <xmax>{box.xmax}</xmax>",
                f"      <ymax>{box.ymax}</ymax>",
                "    </bndbox>",
                "  </object>",
            ]
        )
    lines.append("</annotation>")
    return ("\n".join(lines) + "\n").encode("utf-8")


def class_distribution(dataset: Dataset) -> ClassDistribution:
    """Instance counts per vocabulary class; zero-instance classes included."""
    counts = {name: 0 for name in dataset.class_vocabulary}
    for record in dataset.records:
        for label, _ in record.objects:
            counts[label] += 1
    return ClassDistribution(counts=counts)


def split_dataset(
    dataset: Dataset, seed: int, test_fraction: Fraction | float | str
) -> tuple[Dataset, Dataset]:
    """Deterministic disjoint train/test partition.

    Test size is round-half-up of n * test_fraction; record order within
    each part preserves input order.
    """
    fraction = Fraction(str(test_fraction)) if not isinstance(
        test_fraction, Fraction
    ) else test_fraction
    if not (0 < fraction < 1):
        raise ValueError(f"test_fraction must be in (0, 1), got {fraction}")
    n = len(dataset.records)
    test_size = int(n * fraction + Fraction(1, 2))
    rng = random.Random(seed)
    test_indices = set(rng.sample(range(n), test_size))
    train = tuple(r for i, r in enumerate(dataset.records) if i not in test_indices)
    test = tuple(r for i, r in enumerate(dataset.records) if i in test_indices)
    vocab = dataset.class_vocabulary
    return (
        Dataset(records=train, class_vocabulary=vocab),
        Dataset(records=test, class_vocabulary=vocab),
    )


def read_manifest(path: str | Path) -> list[tuple[str, str]]:
    """Read the image/annotation pair manifest."""
    pairs: list[tuple[str, str]] = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ManifestError(f"{path}:{lineno}: expected image<TAB>xml, got {line!r}")
        pairs.append((parts[0], parts[1]))
    return pairs


def write_manifest(pairs: list[tuple[str, str, str]], path: str | Path) -> None:
    """Write pairs as a manifest sorted by record id.

    Each entry is (record_id, image_relpath, xml_relpath); the id column
    orders the file but is not written.
    """
    lines = [
        f"{image}\t{xml}" for _, image, xml in sorted(pairs, key=lambda p: p[0])
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def load_dataset(
    root: str | Path,
    manifest_path: str | Path,
    vocabulary: tuple[str, ...] = DEFAULT_VOCABULARY,
) -> Dataset:
    """Load every record referenced by a manifest.

    Record ids come from the manifest's image file stems (authoritative
    over the XML <filename> field); image/annotation paths are resolved
    against the dataset root.
    """
    root = Path(root)
    records: list[ImageRecord] = []
    for image_rel, xml_rel in read_manifest(manifest_path):
        xml_path = root / xml_rel
        try:
            document = xml_path.read_bytes()
        except OSError as exc:
            raise ManifestError(f"cannot read annotation {xml_path}: {exc}") from None
        try:
            parsed = parse_voc_annotation(document, vocabulary)
        except DatasetError as exc:
            raise type(exc)(f"{xml_path}: {exc}") from None
        records.append(
            replace(
                parsed,
                id=Path(image_rel).stem,
                image_path=str(root / image_rel),
                annotation_path=str(xml_path),
            )
        )
    return Dataset(records=tuple(records), class_vocabulary=tuple(vocabulary))
