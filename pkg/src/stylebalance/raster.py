"""Pixel raster I/O and the working color space.

All pipeline math runs on float arrays of shape (H, W, 3) with values
normalized to [0, 1]. Files on disk are 8-bit PNG or JPEG.

The working color space is an opponent space (intensity, red-green,
yellow-blue) reached from RGB by a fixed linear transform. Color casts
live almost entirely in the two chroma channels, which makes per-channel
statistics a usable style descriptor.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from PIL import Image

_RGB_TO_OPPONENT = np.array(
    [
        [1 / 3, 1 / 3, 1 / 3],
        [1 / math.sqrt(2), -1 / math.sqrt(2), 0.0],
        [1 / math.sqrt(6), 1 / math.sqrt(6), -2 / math.sqrt(6)],
    ]
)
_OPPONENT_TO_RGB = np.linalg.inv(_RGB_TO_OPPONENT)

# Rec. 601 luma weights
_LUMA = np.array([0.299, 0.587, 0.114])


def load_raster(path: str | Path) -> np.ndarray:
    """Load a PNG/JPEG file as a float64 (H, W, 3) array in [0, 1]."""
    with Image.open(path) as img:
        rgb = img.convert("RGB")
        arr = np.asarray(rgb, dtype=np.float64) / 255.0
    if arr.size == 0:
        raise ValueError(f"empty image: {path}")
    return arr


def save_raster(path: str | Path, raster: np.ndarray) -> None:
    """Write a [0, 1] float raster as an 8-bit image; format from extension."""
    arr = np.clip(raster, 0.0, 1.0)
    data = np.rint(arr * 255.0).astype(np.uint8)
    Image.fromarray(data, mode="RGB").save(path)


def rgb_to_opponent(rgb: np.ndarray) -> np.ndarray:
    return rgb @ _RGB_TO_OPPONENT.T


def opponent_to_rgb(opp: np.ndarray) -> np.ndarray:
    return opp @ _OPPONENT_TO_RGB.T


def mean_opponent_color(raster: np.ndarray) -> np.ndarray:
    """Mean color of an image in the working space.

    Depends only on the multiset of pixel values, so any pixel
    permutation yields the same result.
    """
    if raster.size == 0:
        raise ValueError("empty image")
    mean_rgb = raster.reshape(-1, 3).mean(axis=0)
    return rgb_to_opponent(mean_rgb)


def luminance(raster: np.ndarray) -> np.ndarray:
    """Rec. 601 luma, shape (H, W)."""
    return raster @ _LUMA


def block_mean(plane: np.ndarray, grid: tuple[int, int] = (32, 32)) -> np.ndarray:
    """Downsample a 2-D plane to a grid of cell means.

    Cells are near-equal integer tilings of the plane; a dimension smaller
    than the grid collapses to one cell per pixel row/column.
    """
    h, w = plane.shape
    rows = min(grid[0], h)
    cols = min(grid[1], w)
    redges = (np.arange(rows + 1) * h) // rows
    cedges = (np.arange(cols + 1) * w) // cols
    out = np.empty((rows, cols), dtype=np.float64)
    for i in range(rows):
        band = plane[redges[i] : redges[i + 1]]
        for j in range(cols):
            out[i, j] = band[:, cedges[j] : cedges[j + 1]].mean()
    return out
