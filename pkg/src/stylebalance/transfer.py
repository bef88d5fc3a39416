"""Image-to-image style translation between color domains.

Built-in translation is a per-channel affine moment match in the working
opponent space, optionally composed with synthetic haze (the standard
scattering model out = in * t + airlight * (1 - t)). Both operators
preserve image geometry exactly, so bounding boxes carry over unchanged.
A neural or otherwise external translator can be plugged in through a
command-line protocol; its results go through the same dimension checks.

The quality of any translator can be scored with the cycle loss (L1
between an image and its there-and-back translation) and translated/real
discrimination scored with the adversarial loss (L2 against targets 1.0
for real, 0.0 for fake).
"""

from __future__ import annotations

import shlex
import subprocess
import tempfile
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .raster import load_raster, opponent_to_rgb, rgb_to_opponent, save_raster

STD_FLOOR = 1e-4

TRANSLATOR_KINDS = ("identity", "stat_transfer", "stat_transfer_with_haze", "external")


class TranslationError(Exception):
    """Translation failure; for external commands carries the transcript."""


@dataclass(frozen=True)
class StyleTarget:
    """Color statistics and haze parameters defining one domain's look."""

    domain: str
    channel_mean: tuple[float, float, float]
    channel_std: tuple[float, float, float]
    airlight: tuple[float, float, float]
    transmission: float

    def __post_init__(self) -> None:
        if any(s <= 0 for s in self.channel_std):
            raise TranslationError(f"target {self.domain}: channel_std must be > 0")
        if not (0 < self.transmission <= 1):
            raise TranslationError(
                f"target {self.domain}: transmission must be in (0, 1]"
            )
        if any(not (0 <= a <= 1) for a in self.airlight):
            raise TranslationError(f"target {self.domain}: airlight must be in [0, 1]")


@dataclass(frozen=True)
class Provenance:
    source_id: str | None = None
    source_domain: str | None = None
    target_domain: str | None = None
    translator_kind: str | None = None
    copy_index: int | None = None


@dataclass(frozen=True)
class TranslationResult:
    image: np.ndarray
    clipped_fraction: float
    provenance: Provenance


@dataclass(frozen=True)
class Translator:
    """Dispatchable translation backend.

    stat_transfer kinds need a StyleTarget per domain; external needs a
    command template with {input} {output} {source_domain} {target_domain}
    placeholders.
    """

    kind: str
    targets: dict[str, StyleTarget] | None = None
    command: str | None = None
    timeout: float = 120.0

    def __post_init__(self) -> None:
        if self.kind not in TRANSLATOR_KINDS:
            raise TranslationError(f"unknown translator kind {self.kind!r}")
        if self.kind in ("stat_transfer", "stat_transfer_with_haze") and not self.targets:
            raise TranslationError(f"{self.kind} translator needs per-domain targets")
        if self.kind == "external" and not self.command:
            raise TranslationError("external translator needs a command template")


def compute_style_target(
    pool_images,
    domain: str,
    haze_defaults: tuple[tuple[float, float, float], float],
    std_floor: float = STD_FLOOR,
) -> StyleTarget:
    """Pooled per-channel moments over all pixels of all pool images.

    Moments are taken in the working opponent space; a zero-variance
    channel is floored at std_floor to keep the transfer map invertible.
    Haze parameters come from the per-domain defaults.
    """
    n = 0
    total = np.zeros(3)
    total_sq = np.zeros(3)
    for image in pool_images:
        opp = rgb_to_opponent(image.reshape(-1, 3))
        n += opp.shape[0]
        total += opp.sum(axis=0)
        total_sq += (opp**2).sum(axis=0)
    if n == 0:
        raise TranslationError(f"domain {domain}: empty pool")
    mean = total / n
    var = np.maximum(total_sq / n - mean**2, 0.0)
    std = np.sqrt(var)
    floored = np.maximum(std, std_floor)
    airlight, transmission = haze_defaults
    return StyleTarget(
        domain=domain,
        channel_mean=tuple(mean.tolist()),
        channel_std=tuple(floored.tolist()),
        airlight=tuple(airlight),
        transmission=transmission,
    )


def color_transfer(
    image: np.ndarray, source: StyleTarget, target: StyleTarget
) -> TranslationResult:
    """Affine per-channel moment match source -> target.

    In the working space: out = (in - source.mean) * target.std/source.std
    + target.mean, converted back to RGB and clipped to [0, 1]. The
    fraction of samples that needed clipping is reported.
    """
    opp = rgb_to_opponent(image)
    src_mean = np.asarray(source.channel_mean)
    src_std = np.asarray(source.channel_std)
    tgt_mean = np.asarray(target.channel_mean)
    tgt_std = np.asarray(target.channel_std)
    out_opp = (opp - src_mean) * (tgt_std / src_std) + tgt_mean
    out_rgb = opponent_to_rgb(out_opp)
    clipped = float(np.mean((out_rgb < 0.0) | (out_rgb > 1.0)))
    return TranslationResult(
        image=np.clip(out_rgb, 0.0, 1.0),
        clipped_fraction=clipped,
        provenance=Provenance(
            source_domain=source.domain,
            target_domain=target.domain,
            translator_kind="stat_transfer",
        ),
    )


def apply_haze(
    image: np.ndarray, airlight: tuple[float, float, float], transmission: float
) -> np.ndarray:
    """Scattering-model haze: out = in * t + airlight * (1 - t).

    A convex combination per pixel and channel, so outputs stay in [0, 1]
    whenever inputs do.
    """
    if not (0 < transmission <= 1):
        raise TranslationError(f"transmission must be in (0, 1], got {transmission}")
    a = np.asarray(airlight, dtype=np.float64)
    return image * transmission + a * (1.0 - transmission)


def _run_external(
    translator: Translator, image: np.ndarray, source: str, target: str
) -> np.ndarray:
    with tempfile.TemporaryDirectory(prefix="stylebalance-xlate-") as workdir:
        input_path = Path(workdir) / "input.png"
        output_path = Path(workdir) / "output.png"
        save_raster(input_path, image)
        fields = {
            "input": str(input_path),
            "output": str(output_path),
            "source_domain": source,
            "target_domain": target,
        }
        try:
            argv = [token.format(**fields) for token in shlex.split(translator.command)]
        except KeyError as exc:
            raise TranslationError(f"unknown placeholder {exc} in command template") from None
        try:
            proc = subprocess.run(
                argv, capture_output=True, text=True, timeout=translator.timeout
            )
        except subprocess.TimeoutExpired:
            raise TranslationError(
                f"external translator timed out after {translator.timeout}s: {argv}"
            ) from None
        except OSError as exc:
            raise TranslationError(f"cannot run {argv}: {exc}") from None
        transcript = (
            f"command: {argv}\nexit: {proc.returncode}\n"
            f"stdout: {proc.stdout.strip()}\nstderr: {proc.stderr.strip()}"
        )
        if proc.returncode != 0:
            raise TranslationError(f"external translator failed\n{transcript}")
        if not output_path.exists():
            raise TranslationError(f"external translator wrote no output\n{transcript}")
        result = load_raster(output_path)
        if result.shape != image.shape:
            raise TranslationError(
                f"external translator changed dimensions "
                f"{image.shape[1]}x{image.shape[0]} -> "
                f"{result.shape[1]}x{result.shape[0]}\n{transcript}"
            )
        return result


def translate(
    translator: Translator, image: np.ndarray, source: str, target: str
) -> TranslationResult:
    """Translate one image between domains; dimensions always preserved."""
    provenance = Provenance(
        source_domain=source, target_domain=target, translator_kind=translator.kind
    )
    if translator.kind == "identity":
        return TranslationResult(
            image=image.copy(), clipped_fraction=0.0, provenance=provenance
        )
    if translator.kind == "external":
        out = _run_external(translator, image, source, target)
        return TranslationResult(image=out, clipped_fraction=0.0, provenance=provenance)

    targets = translator.targets or {}
    for name in (source, target):
        if name not in targets:
            raise TranslationError(f"translator has no style target for domain {name!r}")
    result = color_transfer(image, targets[source], targets[target])
    out = result.image
    if translator.kind == "stat_transfer_with_haze":
        tgt = targets[target]
        out = apply_haze(out, tgt.airlight, tgt.transmission)
    return TranslationResult(
        image=out,
        clipped_fraction=result.clipped_fraction,
        provenance=replace(provenance, translator_kind=translator.kind),
    )


def cycle_loss(translator: Translator, image: np.ndarray, a: str, b: str) -> float:
    """Mean absolute per-sample difference between image and its a->b->a
    round trip; 0 for the identity translator."""
    forward = translate(translator, image, a, b)
    back = translate(translator, forward.image, b, a)
    return float(np.mean(np.abs(image - back.image)))


def adversarial_loss(discriminator_scores: list[float], labels: list[str]) -> float:
    """Mean squared distance of scores to their targets (real=1, fake=0)."""
    if len(discriminator_scores) != len(labels):
        raise ValueError(
            f"{len(discriminator_scores)} scores vs {len(labels)} labels"
        )
    if not discriminator_scores:
        raise ValueError("empty score list")
    bad = [l for l in labels if l not in ("real", "fake")]
    if bad:
        raise ValueError(f"labels must be 'real' or 'fake', got {bad}")
    targets = np.array([1.0 if l == "real" else 0.0 for l in labels])
    scores = np.asarray(discriminator_scores, dtype=np.float64)
    return float(np.mean((scores - targets) ** 2))
