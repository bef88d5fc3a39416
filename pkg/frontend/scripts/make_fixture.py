"""Build a 5-item review-queue fixture for the UI session test.

Usage: python3 make_fixture.py <dir> <port>

Writes a tiny dataset (urchin-heavy, two mixed minority images), plans
exactly 5 copies at tolerance 12/7, generates them, and leaves a
run.conf whose review service binds to the given port.
"""

import json
import sys
from pathlib import Path

import numpy as np

from stylebalance import pipeline
from stylebalance.config import load_config
from stylebalance.dataset import BoundingBox, ImageRecord, serialize_voc_annotation, write_manifest
from stylebalance.raster import save_raster

ANCHOR_RGB = {
    "green": (0.22, 0.42, 0.30),
    "blue": (0.18, 0.34, 0.50),
    "deepblue": (0.08, 0.16, 0.38),
    "white": (0.55, 0.60, 0.62),
}


def build(base: Path, port: int) -> None:
    images = base / "data" / "images"
    annotations = base / "data" / "annotations"
    images.mkdir(parents=True)
    annotations.mkdir(parents=True)

    specs = [
        ("u0", ["seaurchin"] * 4, "green"),
        ("u1", ["seaurchin"] * 4, "blue"),
        ("u2", ["seaurchin"] * 4, "deepblue"),
        ("m0", ["seacucumber", "scallop", "starfish"], "green"),
        ("m1", ["seacucumber", "scallop", "starfish"], "white"),
    ]
    pairs = []
    for index, (record_id, labels, domain) in enumerate(specs):
        rng = np.random.default_rng(index + 1)
        raster = np.tile(np.asarray(ANCHOR_RGB[domain]), (48, 64, 1))
        raster = np.clip(raster + rng.normal(0, 0.03, raster.shape), 0, 1)
        save_raster(images / f"{record_id}.png", raster)
        boxes = tuple(
            (label, BoundingBox(2 + 15 * i, 2, 14 + 15 * i, 20))
            for i, label in enumerate(labels)
        )
        record = ImageRecord(
            id=record_id,
            image_path=f"{record_id}.png",
            width=64,
            height=48,
            objects=boxes,
        )
        (annotations / f"{record_id}.xml").write_bytes(serialize_voc_annotation(record))
        pairs.append((record_id, f"images/{record_id}.png", f"annotations/{record_id}.xml"))
    write_manifest(pairs, base / "data" / "manifest.tsv")

    (base / "run.conf").write_text(
        "dataset_root: data\n"
        "manifest: data/manifest.tsv\n"
        "out_dir: out\n"
        "work_dir: work\n"
        "tolerance: 12/7\n"
        "seed: 7\n"
        f"bind: 127.0.0.1:{port}\n",
        encoding="utf-8",
    )
    config = load_config(base / "run.conf")
    plan = pipeline.build_plan(config)
    summary = pipeline.generate(config)
    print(
        json.dumps(
            {
                "copies": plan.total_copies,
                "pending": summary.by_state["pending"],
                "config": str(base / "run.conf"),
            }
        )
    )


if __name__ == "__main__":
    build(Path(sys.argv[1]), int(sys.argv[2]))
