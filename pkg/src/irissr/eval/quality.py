"""Corpus-level quality assessment of reconstructions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..imgcore import QualityTriple, fsim, psnr, ssim

# PSNR of identical images is infinite; aggregates report this sentinel instead
PSNR_SENTINEL = 100.0


@dataclass(frozen=True)
class QualitySummary:
    mean: QualityTriple
    std: QualityTriple
    per_pair: tuple[QualityTriple, ...]

    def __len__(self):
        return len(self.per_pair)


def _crop(img: np.ndarray, roi):
    if roi is None:
        return img
    x, y, w, h = roi
    return img[y:y + h, x:x + w]


def pair_quality(ref, test, roi=None, with_fsim: bool = True) -> QualityTriple:
    a = _crop(np.asarray(ref, np.float64), roi)
    b = _crop(np.asarray(test, np.float64), roi)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    p = psnr(a, b)
    return QualityTriple(PSNR_SENTINEL if math.isinf(p) else p, ssim(a, b),
                         fsim(a, b) if with_fsim else float("nan"))


def quality_report(pairs, roi=None, with_fsim: bool = True) -> QualitySummary:
    """Mean and population standard deviation of PSNR/SSIM/FSIM over ``pairs``.

    ``roi`` is an optional ``(x, y, width, height)`` crop applied to both
    images, e.g. to score the iris region on its own.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("quality_report needs at least one image pair")
    rows = [pair_quality(r, t, roi, with_fsim) for r, t in pairs]
    arr = np.array([(q.psnr, q.ssim, q.fsim) for q in rows])
    return QualitySummary(QualityTriple(*arr.mean(axis=0)), QualityTriple(*arr.std(axis=0)), tuple(rows))
