"""Run configuration: one key-value text file drives every pipeline stage.

Format is one ``key: value`` per line, ``#`` comments, unknown keys
rejected. Relative paths are resolved against the config file's
directory. A run is reproducible from (config, input files) alone; every
command echoes the effective config hash so artifacts can be traced back
to the configuration that produced them.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .dataset import DEFAULT_VOCABULARY
from .domains import DEFAULT_DOMAINS, DomainAnchor, default_anchors, read_anchor_file
from .qc import QCThresholds
from .transfer import TRANSLATOR_KINDS

# airlight RGB + transmission per default domain; deepblue is the
# haziest (lowest transmission), white the clearest
DEFAULT_HAZE = {
    "green": ((0.35, 0.55, 0.45), 0.75),
    "blue": ((0.30, 0.45, 0.60), 0.72),
    "deepblue": ((0.10, 0.20, 0.45), 0.60),
    "white": ((0.75, 0.80, 0.82), 0.90),
}


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    dataset_root: Path
    manifest: Path
    out_dir: Path
    work_dir: Path
    vocabulary: tuple[str, ...] = DEFAULT_VOCABULARY
    domains: tuple[str, ...] = DEFAULT_DOMAINS
    anchors: list[DomainAnchor] = field(default_factory=default_anchors)
    overrides_path: Path | None = None
    minority_threshold: Fraction = Fraction(1, 2)
    minority_classes: tuple[str, ...] = ()
    score_lambda: float = 1.0
    tolerance: Fraction = Fraction(5, 4)
    max_copies_per_pair: int = 3
    max_total_jobs: int = 10000
    translator: str = "stat_transfer"
    external_command: str | None = None
    external_timeout: float = 120.0
    generate_workers: int = 4
    haze: dict[str, tuple[tuple[float, float, float], float]] = field(
        default_factory=lambda: dict(DEFAULT_HAZE)
    )
    qc_thresholds: QCThresholds = field(default_factory=QCThresholds)
    seed: int = 0
    bind: str = "127.0.0.1:8765"
    ui_dir: Path | None = None

    @property
    def plan_path(self) -> Path:
        return self.work_dir / "plan.tsv"

    @property
    def queue_dir(self) -> Path:
        return self.work_dir / "queue"

    @property
    def generated_dir(self) -> Path:
        return self.work_dir / "generated"

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode("utf-8")).hexdigest()[:12]

    def canonical_text(self) -> str:
        lines = []
        for key, value in sorted(self.snapshot().items()):
            lines.append(f"{key}: {value}")
        return "\n".join(lines) + "\n"

    def snapshot(self) -> dict[str, str]:
        """Flat, deterministic key-value view for manifests and hashing."""
        snap = {
            "dataset_root": str(self.dataset_root),
            "manifest": str(self.manifest),
            "out_dir": str(self.out_dir),
            "work_dir": str(self.work_dir),
            "vocabulary": " ".join(self.vocabulary),
            "domains": " ".join(self.domains),
            "minority_threshold": str(self.minority_threshold),
            "minority_classes": " ".join(self.minority_classes),
            "score_lambda": repr(self.score_lambda),
            "tolerance": str(self.tolerance),
            "max_copies_per_pair": str(self.max_copies_per_pair),
            "max_total_jobs": str(self.max_total_jobs),
            "translator": self.translator,
            "external_command": self.external_command or "",
            "external_timeout": repr(self.external_timeout),
            "generate_workers": str(self.generate_workers),
            "seed": str(self.seed),
            "qc_warn_clip": repr(self.qc_thresholds.warn_clip),
            "qc_block_clip": repr(self.qc_thresholds.block_clip),
            "qc_warn_structure": repr(self.qc_thresholds.warn_structure),
            "qc_block_structure": repr(self.qc_thresholds.block_structure),
        }
        for anchor in self.anchors:
            snap[f"anchor.{anchor.domain}"] = (
                " ".join(repr(v) for v in anchor.mean_color)
                + f" {anchor.tolerance!r}"
            )
        for domain, (airlight, transmission) in sorted(self.haze.items()):
            snap[f"haze.{domain}"] = (
                " ".join(repr(v) for v in airlight) + f" {transmission!r}"
            )
        return snap


_KNOWN_KEYS = {
    "dataset_root",
    "manifest",
    "out_dir",
    "work_dir",
    "vocabulary",
    "domains",
    "anchors",
    "domain_overrides",
    "minority_threshold",
    "minority_classes",
    "score_lambda",
    "tolerance",
    "max_copies_per_pair",
    "max_total_jobs",
    "translator",
    "external_command",
    "external_timeout",
    "generate_workers",
    "qc_warn_clip",
    "qc_block_clip",
    "qc_warn_structure",
    "qc_block_structure",
    "seed",
    "bind",
    "ui_dir",
}


def _parse_keyvalues(path: Path) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").split("\n"), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if ":" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key: value', got {line!r}")
        key, _, value = stripped.partition(":")
        key = key.strip()
        if key in values:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        values[key] = value.strip()
    return values


def _haze_from_text(domain: str, text: str, where: str) -> tuple[tuple[float, float, float], float]:
    parts = text.split()
    if len(parts) != 4:
        raise ConfigError(f"{where}: haze.{domain} needs 'r g b transmission'")
    r, g, b, t = (float(p) for p in parts)
    return ((r, g, b), t)


def load_config(path: str | Path, seed_override: int | None = None) -> RunConfig:
    """Parse a run config file; relative paths resolve against its folder."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    base = path.parent
    raw = _parse_keyvalues(path)

    haze_keys = {k for k in raw if k.startswith("haze.")}
    unknown = set(raw) - _KNOWN_KEYS - haze_keys
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")

    def required_path(key: str) -> Path:
        if key not in raw or not raw[key]:
            raise ConfigError(f"{path}: missing required key {key!r}")
        return (base / raw[key]).resolve() if not Path(raw[key]).is_absolute() else Path(raw[key])

    def optional_path(key: str) -> Path | None:
        if key not in raw or not raw[key]:
            return None
        value = Path(raw[key])
        return value if value.is_absolute() else (base / value).resolve()

    dataset_root = required_path("dataset_root")
    manifest = required_path("manifest")
    out_dir = required_path("out_dir")
    work_dir = optional_path("work_dir") or out_dir.parent / (out_dir.name + ".work")

    vocabulary = tuple(raw.get("vocabulary", " ".join(DEFAULT_VOCABULARY)).split())
    if not vocabulary:
        raise ConfigError(f"{path}: vocabulary must not be empty")

    anchors_path = optional_path("anchors")
    anchors = read_anchor_file(anchors_path) if anchors_path else default_anchors()
    domains = tuple(raw["domains"].split()) if raw.get("domains") else tuple(
        a.domain for a in anchors
    )
    if set(domains) != {a.domain for a in anchors}:
        raise ConfigError(
            f"{path}: domains {domains} disagree with anchor domains "
            f"{tuple(a.domain for a in anchors)}"
        )
    # anchor list follows the configured domain order
    by_domain = {a.domain: a for a in anchors}
    anchors = [by_domain[d] for d in domains]

    haze = dict(DEFAULT_HAZE)
    for key in haze_keys:
        domain = key[len("haze.") :]
        if domain not in domains:
            raise ConfigError(f"{path}: haze for unknown domain {domain!r}")
        haze[domain] = _haze_from_text(domain, raw[key], str(path))
    missing_haze = [d for d in domains if d not in haze]
    if missing_haze:
        raise ConfigError(f"{path}: no haze defaults for domains {missing_haze}")
    haze = {d: haze[d] for d in domains}

    minority_classes = tuple(raw.get("minority_classes", "").split())
    for name in minority_classes:
        if name not in vocabulary:
            raise ConfigError(f"{path}: minority class {name!r} not in vocabulary")

    translator = raw.get("translator", "stat_transfer")
    if translator not in TRANSLATOR_KINDS:
        raise ConfigError(f"{path}: unknown translator {translator!r}")
    external_command = raw.get("external_command") or None
    if translator == "external" and not external_command:
        raise ConfigError(f"{path}: external translator needs external_command")

    try:
        thresholds = QCThresholds(
            warn_clip=float(raw.get("qc_warn_clip", 0.10)),
            block_clip=float(raw.get("qc_block_clip", 0.25)),
            warn_structure=float(raw.get("qc_warn_structure", 0.8)),
            block_structure=float(raw.get("qc_block_structure", 0.6)),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None

    try:
        config = RunConfig(
            dataset_root=dataset_root,
            manifest=manifest,
            out_dir=out_dir,
            work_dir=work_dir,
            vocabulary=vocabulary,
            domains=domains,
            anchors=anchors,
            overrides_path=optional_path("domain_overrides"),
            minority_threshold=Fraction(raw.get("minority_threshold", "1/2")),
            minority_classes=minority_classes,
            score_lambda=float(raw.get("score_lambda", 1.0)),
            tolerance=Fraction(raw.get("tolerance", "5/4")),
            max_copies_per_pair=int(raw.get("max_copies_per_pair", 3)),
            max_total_jobs=int(raw.get("max_total_jobs", 10000)),
            translator=translator,
            external_command=external_command,
            external_timeout=float(raw.get("external_timeout", 120.0)),
            generate_workers=int(raw.get("generate_workers", 4)),
            haze=haze,
            qc_thresholds=thresholds,
            seed=int(raw.get("seed", 0)),
            bind=raw.get("bind", "127.0.0.1:8765"),
            ui_dir=optional_path("ui_dir"),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if seed_override is not None:
        config.seed = seed_override
    if config.score_lambda < 0:
        raise ConfigError(f"{path}: score_lambda must be >= 0")
    if config.tolerance < 1:
        raise ConfigError(f"{path}: tolerance must be >= 1")
    return config
