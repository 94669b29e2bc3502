"""Separable bilinear / bicubic resampling, degradation and patch extraction.

Resampling uses pixel-centre alignment (``src = (i + 0.5) * in/out - 0.5``)
with edge clamping and no anti-alias prefilter. All functions accept either
a single raster ``(h, w)`` or a stack ``(..., h, w)``.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

KERNELS = ("bilinear", "bicubic")
BICUBIC_A = -0.5


def _keys(x: np.ndarray, a: float = BICUBIC_A) -> np.ndarray:
    x = np.abs(x)
    out = np.zeros_like(x)
    near = x <= 1.0
    far = (x > 1.0) & (x < 2.0)
    xn = x[near]
    out[near] = (a + 2.0) * xn**3 - (a + 3.0) * xn**2 + 1.0
    xf = x[far]
    out[far] = a * xf**3 - 5.0 * a * xf**2 + 8.0 * a * xf - 4.0 * a
    return out


def _triangle(x: np.ndarray) -> np.ndarray:
    return np.clip(1.0 - np.abs(x), 0.0, None)


@lru_cache(maxsize=256)
def resample_matrix(n_in: int, n_out: int, kernel: str) -> np.ndarray:
    """Dense ``(n_out, n_in)`` interpolation matrix along one axis."""
    if kernel not in KERNELS:
        raise ValueError(f"unknown kernel {kernel!r}; expected one of {KERNELS}")
    if n_in < 1 or n_out < 1:
        raise ValueError("resample extent must be >= 1")
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    support = 1 if kernel == "bilinear" else 2
    base = np.floor(src).astype(int)
    offsets = np.arange(-support + 1, support + 1)
    taps = base[:, None] + offsets[None, :]
    dist = src[:, None] - taps
    weights = _triangle(dist) if kernel == "bilinear" else _keys(dist)
    weights /= weights.sum(axis=1, keepdims=True)
    mat = np.zeros((n_out, n_in))
    rows = np.repeat(np.arange(n_out), offsets.size)
    np.add.at(mat, (rows, np.clip(taps, 0, n_in - 1).ravel()), weights.ravel())
    mat.flags.writeable = False
    return mat


def resize(img: np.ndarray, out_w: int, out_h: int, kernel: str = "bicubic") -> np.ndarray:
    """Resample to exactly ``(out_h, out_w)``; results are clamped to [0, 1]."""
    if out_w < 1 or out_h < 1:
        raise ValueError(f"target size must be positive, got {out_w}x{out_h}")
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape[-2:]
    if (h, w) == (out_h, out_w):
        return img.copy()
    ry = resample_matrix(h, out_h, kernel)
    rx = resample_matrix(w, out_w, kernel)
    out = np.matmul(np.matmul(ry, img), rx.T)
    return np.clip(out, 0.0, 1.0)


def downscale(img: np.ndarray, factor: int) -> np.ndarray:
    """Bicubic downscale to ``(floor(h/f), floor(w/f))``."""
    if factor < 1 or int(factor) != factor:
        raise ValueError(f"factor must be a positive integer, got {factor}")
    h, w = np.shape(img)[-2:]
    lh, lw = h // factor, w // factor
    if lh < 1 or lw < 1:
        raise ValueError(f"image {w}x{h} is smaller than factor {factor}")
    return resize(img, lw, lh, "bicubic")


def degrade(img: np.ndarray, factor: int, return_lr: bool = False):
    """Bicubic down-then-up degradation that keeps the input raster size.

    With ``return_lr=True`` the intermediate low-resolution raster is
    returned as well: ``(degraded, lr)``.
    """
    if factor < 2:
        raise ValueError(f"degradation factor must be >= 2, got {factor}")
    h, w = np.shape(img)[-2:]
    lr = downscale(img, factor)
    up = resize(lr, w, h, "bicubic")
    return (up, lr) if return_lr else up


def patch_count(h: int, w: int, size: int, stride: int) -> int:
    return ((h - size) // stride + 1) * ((w - size) // stride + 1)


def extract_patches(img: np.ndarray, size: int, stride: int) -> np.ndarray:
    """All fully contained ``size x size`` patches in raster order.

    Returns an array of shape ``(count, size, size)``.
    """
    img = np.asarray(img)
    if stride < 1:
        raise ValueError("stride must be >= 1")
    h, w = img.shape
    if size < 1 or size > min(h, w):
        raise ValueError(f"patch size {size} exceeds image {w}x{h}")
    win = np.lib.stride_tricks.sliding_window_view(img, (size, size))
    return win[::stride, ::stride].reshape(-1, size, size).copy()
