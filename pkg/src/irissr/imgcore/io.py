"""Reading and writing 8-bit grayscale rasters (PNG and binary PGM)."""

from __future__ import annotations

import os
import re

import numpy as np
from PIL import Image, UnidentifiedImageError

# ITU-R BT.601 luma weights
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


class ImageFormatError(ValueError):
    pass


def as_gray(data) -> np.ndarray:
    """Validate and return a float64 2-D raster with intensities in [0, 1]."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D raster, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError("zero-dimension image")
    if not np.all(np.isfinite(arr)):
        raise ValueError("image contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError("intensities must lie in [0, 1]")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


def _read_pgm(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    # header: magic, width, height, maxval, each separated by whitespace/comments
    header = re.match(rb"P5(?:\s+|#[^\n]*\n)+(\d+)(?:\s+|#[^\n]*\n)+(\d+)"
                      rb"(?:\s+|#[^\n]*\n)+(\d+)\s", raw)
    if header is None:
        raise ImageFormatError(f"{path}: not a binary PGM")
    w, h, maxval = (int(g) for g in header.groups())
    if w == 0 or h == 0:
        raise ImageFormatError(f"{path}: zero-dimension image")
    if maxval != 255:
        raise ImageFormatError(f"{path}: only 8-bit PGM is supported (maxval={maxval})")
    body = raw[header.end():]
    if len(body) < w * h:
        raise ImageFormatError(f"{path}: truncated PGM data")
    return np.frombuffer(body[: w * h], dtype=np.uint8).reshape(h, w)


def load_image(path) -> np.ndarray:
    """Load an 8-bit PNG or PGM as a float raster scaled by 1/255.

    RGB inputs are converted to luma with BT.601 weights.
    """
    path = os.fspath(path)
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path, "rb") as fh:
        magic = fh.read(2)
    if magic == b"P5":
        pixels = _read_pgm(path).astype(np.float64)
    else:
        try:
            with Image.open(path) as im:
                im.load()
                if im.mode in ("RGB", "RGBA"):
                    rgb = np.asarray(im.convert("RGB"), dtype=np.float64)
                    pixels = rgb @ np.array(LUMA_WEIGHTS)
                elif im.mode == "L":
                    pixels = np.asarray(im, dtype=np.float64)
                elif im.mode == "P":
                    pixels = np.asarray(im.convert("L"), dtype=np.float64)
                else:
                    raise ImageFormatError(f"{path}: unsupported mode {im.mode}")
        except (UnidentifiedImageError, OSError, SyntaxError) as exc:
            raise ImageFormatError(f"{path}: {exc}") from exc
    if pixels.size == 0:
        raise ImageFormatError(f"{path}: zero-dimension image")
    return as_gray(np.clip(pixels / 255.0, 0.0, 1.0))


def to_uint8(img: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(np.asarray(img) * 255.0), 0, 255).astype(np.uint8)


def save_image(path, img: np.ndarray) -> None:
    """Write as 8-bit gray; ``.pgm`` gets binary P5, everything else PNG."""
    path = os.fspath(path)
    data = to_uint8(img)
    if path.lower().endswith(".pgm"):
        h, w = data.shape
        with open(path, "wb") as fh:
            fh.write(b"P5\n%d %d\n255\n" % (w, h))
            fh.write(data.tobytes())
    else:
        Image.fromarray(data).save(path, format="PNG")
