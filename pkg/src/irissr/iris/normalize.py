"""Rubber-sheet normalization of the iris annulus into a 64x512 rectangle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..imgcore import as_gray
from .segment import SegmentationResult

ROWS, COLS = 64, 512


@dataclass(frozen=True)
class NormalizedIris:
    texture: np.ndarray  # (64, 512) float64
    noise_mask: np.ndarray  # (64, 512) bool, True = usable

    def __post_init__(self):
        if self.texture.shape != (ROWS, COLS) or self.noise_mask.shape != (ROWS, COLS):
            raise ValueError(f"normalized iris must be {ROWS}x{COLS}")


def sample_grid(seg: SegmentationResult, rows: int = ROWS, cols: int = COLS):
    """Image coordinates (x, y) of every rubber-sheet sample.

    Column j sits at angle ``2 pi (j + 0.5) / cols``; row i interpolates
    linearly from the pupil boundary to the iris boundary at
    ``t = (i + 0.5) / rows``.
    """
    theta = 2 * np.pi * (np.arange(cols) + 0.5) / cols
    t = (np.arange(rows) + 0.5) / rows
    p, q = seg.pupil, seg.iris
    px, py = p.cx + p.r * np.cos(theta), p.cy + p.r * np.sin(theta)
    qx, qy = q.cx + q.r * np.cos(theta), q.cy + q.r * np.sin(theta)
    x = (1 - t)[:, None] * px[None] + t[:, None] * qx[None]
    y = (1 - t)[:, None] * py[None] + t[:, None] * qy[None]
    return x, y


def normalize(img, seg: SegmentationResult) -> NormalizedIris:
    img = np.asarray(as_gray(img), dtype=np.float64)
    if not seg.usable:
        raise ValueError("cannot normalize with an unusable segmentation")
    h, w = img.shape
    q = seg.iris
    if q.cx + q.r < 0 or q.cx - q.r > w - 1 or q.cy + q.r < 0 or q.cy - q.r > h - 1:
        raise ValueError("iris circle lies entirely outside the image")
    x, y = sample_grid(seg)
    inside = (x >= 0) & (x <= w - 1) & (y >= 0) & (y <= h - 1)
    tex = ndimage.map_coordinates(img, [y, x], order=1, mode="nearest")
    in_pupil = np.hypot(x - seg.pupil.cx, y - seg.pupil.cy) < seg.pupil.r
    mask = inside & ~in_pupil
    tex = np.where(inside, tex, 0.0)
    return NormalizedIris(tex, mask)
