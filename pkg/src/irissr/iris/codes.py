"""Iris codes: complex Gabor and quadratic-spline wavelet encoders, Hamming matching.

Bits are stored packed, column-major: all bits of angular column 0 first,
then column 1, and so on. Within a column the order is (band, filter, bit).
A circular column shift of the texture is therefore a roll of the packed
byte string whenever a column holds a multiple of 8 bits.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import numpy as np

from .normalize import NormalizedIris

GABOR_WAVELENGTHS = (8, 12, 16, 24, 32, 48, 64, 96)
QSW_SCALES = 4
QSW_LOW = np.array([0.125, 0.375, 0.375, 0.125])
QSW_HIGH = np.array([-2.0, 2.0])
MAG_EPS = 1e-4
DEFAULT_MAX_SHIFT = 8
EMPTY_SENTINEL = 1.0


@dataclass(frozen=True)
class IrisCode:
    bits: np.ndarray  # packed uint8
    mask: np.ndarray  # packed uint8, 1 = valid
    scheme: str
    geometry: tuple[int, int, int]  # (bands, columns, filters)

    def __post_init__(self):
        if self.bits.shape != self.mask.shape:
            raise ValueError("bits and mask lengths differ")
        if self.bits.size * 8 != self.n_bits:
            raise ValueError(f"packed length {self.bits.size} does not match geometry {self.geometry}")

    @property
    def n_bits(self) -> int:
        b, c, f = self.geometry
        return b * c * f * 2

    @property
    def bits_per_column(self) -> int:
        b, _, f = self.geometry
        return b * f * 2

    def unpacked(self) -> tuple[np.ndarray, np.ndarray]:
        return np.unpackbits(self.bits).astype(bool), np.unpackbits(self.mask).astype(bool)


def _make_code(bits: np.ndarray, mask: np.ndarray, scheme: str) -> IrisCode:
    """``bits``/``mask``: (bands, cols, filters, 2) booleans."""
    b, c, f, _ = bits.shape
    order = (1, 0, 2, 3)
    packed = np.packbits(np.transpose(bits, order).ravel())
    packed_mask = np.packbits(np.transpose(mask, order).ravel())
    return IrisCode(packed, packed_mask, scheme, (b, c, f))


def band_signals(norm: NormalizedIris, bands: int) -> tuple[np.ndarray, np.ndarray]:
    """Average rows into ``bands`` 1-D signals over valid pixels only.

    A (band, column) sample is usable when at least half its rows are.
    """
    rows, cols = norm.texture.shape
    if rows % bands:
        raise ValueError(f"{rows} rows cannot be split into {bands} bands")
    tex = norm.texture.reshape(bands, rows // bands, cols)
    m = norm.noise_mask.reshape(bands, rows // bands, cols)
    cnt = m.sum(axis=1)
    sig = np.where(cnt > 0, (tex * m).sum(axis=1) / np.maximum(cnt, 1), np.nan)
    for k in range(bands):
        fill = np.nanmean(sig[k]) if np.isfinite(sig[k]).any() else 0.0
        sig[k] = np.where(np.isfinite(sig[k]), sig[k], fill)
    return sig, cnt * 2 >= rows // bands


def gabor_kernel(wavelength: float, n: int) -> np.ndarray:
    """Zero-mean complex Gabor of length ``n`` centred at index 0 (circular)."""
    x = np.arange(n, dtype=np.float64)
    x = np.where(x > n // 2, x - n, x)
    sigma = 0.5 * wavelength
    env = np.exp(-0.5 * (x / sigma) ** 2)
    k = env * np.exp(2j * np.pi * x / wavelength)
    # remove the DC leak of the truncated carrier
    k -= env * (k.sum() / env.sum())
    return k


def gabor_responses(signals: np.ndarray, wavelengths) -> np.ndarray:
    """Circular convolution of every band with every kernel: (bands, cols, filters)."""
    n = signals.shape[-1]
    spec = np.fft.fft(signals, axis=-1)
    out = [np.fft.ifft(spec * np.fft.fft(gabor_kernel(lam, n)), axis=-1) for lam in wavelengths]
    return np.stack(out, axis=-1)


def encode_gabor(norm: NormalizedIris, wavelengths=GABOR_WAVELENGTHS, bands: int = 4) -> IrisCode:
    wavelengths = tuple(float(v) for v in wavelengths)
    cols = norm.texture.shape[1]
    if not wavelengths or any(not 0 < lam <= cols for lam in wavelengths):
        raise ValueError(f"wavelengths must lie in (0, {cols}]")
    sig, valid = band_signals(norm, bands)
    resp = gabor_responses(sig, wavelengths)
    bits = np.stack([resp.real >= 0, resp.imag >= 0], axis=-1)
    ok = (np.abs(resp) >= MAG_EPS) & valid[..., None]
    return _make_code(bits, np.repeat(ok[..., None], 2, axis=-1), "gabor")


def _atrous(sig: np.ndarray, taps: np.ndarray, hole: int, origin: int) -> np.ndarray:
    """Circular correlation ``sum_k taps[k] * sig[x + hole * (k - origin)]``."""
    out = np.zeros_like(sig)
    for k, t in enumerate(taps):
        out += t * np.roll(sig, -hole * (k - origin), axis=-1)
    return out


def qsw_details(signals: np.ndarray, scales: int = QSW_SCALES) -> np.ndarray:
    """Undecimated quadratic-spline wavelet details at scales 2^1..2^scales."""
    smooth = signals.astype(np.float64)
    details = []
    for j in range(scales):
        hole = 2**j
        details.append(_atrous(smooth, QSW_HIGH, hole, 0))
        smooth = _atrous(smooth, QSW_LOW, hole, 1)
    return np.stack(details, axis=-1)


def encode_qsw(norm: NormalizedIris, bands: int = 4, scales: int = QSW_SCALES) -> IrisCode:
    sig, valid = band_signals(norm, bands)
    w = qsw_details(sig, scales)
    dw = np.roll(w, -1, axis=1) - w
    bits = np.stack([w >= 0, dw >= 0], axis=-1)
    ok = (np.abs(w) >= MAG_EPS) & valid[..., None]
    return _make_code(bits, np.repeat(ok[..., None], 2, axis=-1), "qsw")


def _shifted(packed: np.ndarray, code: IrisCode, shift: int) -> np.ndarray:
    per_col = code.bits_per_column
    if per_col % 8 == 0:
        return np.roll(packed, shift * per_col // 8)
    return np.packbits(np.roll(np.unpackbits(packed), shift * per_col))


def hamming_distance(a: IrisCode, b: IrisCode, max_shift: int = DEFAULT_MAX_SHIFT) -> float:
    """Minimum over column shifts of the masked fractional Hamming distance."""
    if a.scheme != b.scheme or tuple(a.geometry) != tuple(b.geometry):
        raise ValueError(f"incompatible codes: {a.scheme}{a.geometry} vs {b.scheme}{b.geometry}")
    if max_shift < 0:
        raise ValueError("max_shift must be >= 0")
    shifts = range(-max_shift, max_shift + 1)
    bb = np.stack([_shifted(b.bits, b, s) for s in shifts])
    bm = np.stack([_shifted(b.mask, b, s) for s in shifts])
    joint = a.mask[None] & bm
    n = np.bitwise_count(joint).sum(axis=1)
    diff = np.bitwise_count((a.bits[None] ^ bb) & joint).sum(axis=1)
    ok = n > 0
    if not ok.any():
        return EMPTY_SENTINEL
    return float(np.min(diff[ok] / n[ok]))


TEMPLATE_MAGIC = b"IRISCODE"
TEMPLATE_VERSION = 1


def save_template(path, code: IrisCode) -> None:
    """Binary template: magic, version, scheme tag, geometry, packed bits, packed mask."""
    tag = code.scheme.encode("ascii")
    with open(path, "wb") as fh:
        fh.write(TEMPLATE_MAGIC)
        fh.write(struct.pack("<IB", TEMPLATE_VERSION, len(tag)))
        fh.write(tag)
        fh.write(struct.pack("<IIII", *code.geometry, code.bits.size))
        fh.write(code.bits.tobytes())
        fh.write(code.mask.tobytes())


def load_template(path) -> IrisCode:
    path = os.fspath(path)
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != TEMPLATE_MAGIC:
        raise ValueError(f"{path}: not an iris template")
    version, tag_len = struct.unpack("<IB", raw[8:13])
    if version != TEMPLATE_VERSION:
        raise ValueError(f"{path}: unsupported template version {version}")
    scheme = raw[13:13 + tag_len].decode("ascii")
    off = 13 + tag_len
    b, c, f, nbytes = struct.unpack("<IIII", raw[off:off + 16])
    off += 16
    if len(raw) != off + 2 * nbytes:
        raise ValueError(f"{path}: truncated template")
    bits = np.frombuffer(raw[off:off + nbytes], np.uint8).copy()
    mask = np.frombuffer(raw[off + nbytes:], np.uint8).copy()
    return IrisCode(bits, mask, scheme, (b, c, f))


ENCODERS = {"gabor": encode_gabor, "qsw": encode_qsw}
