"""Uniform reconstruction interface over all SR engines, plus model files."""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field

import numpy as np

from ..imgcore import as_gray, downscale, resize
from ..nn import Network, read_container, write_container
from ..nn.serialize import ModelFormatError, network_from_spec, network_spec
from .models import SRCNN_MARGIN
from .pca import PCAEigenPatchModel, pca_arrays, pca_from_arrays, pca_reconstruct

log = logging.getLogger(__name__)

INTERPOLATION_KINDS = ("bilinear", "bicubic")
TRAINABLE_KINDS = ("srcnn", "vdcnn", "srgan", "pca_eigenpatch")
ENGINE_KINDS = INTERPOLATION_KINDS + TRAINABLE_KINDS
SRGAN_FACTOR = 4
# images are pushed through the networks in horizontal bands of this many rows
BAND_ROWS = 96


class UnsupportedFactorError(ValueError):
    pass


@dataclass
class SREngine:
    kind: str
    factors: tuple[int, ...] = ()
    networks: dict[str, Network] = field(default_factory=dict)
    pca: PCAEigenPatchModel | None = None
    meta: dict = field(default_factory=dict)
    history: list[float] = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ENGINE_KINDS:
            raise ValueError(f"unknown engine kind {self.kind!r}")
        self.factors = tuple(sorted(int(f) for f in self.factors))
        if self.kind in INTERPOLATION_KINDS and (self.networks or self.pca is not None):
            raise ValueError("interpolation engines carry no payload")
        if self.kind in ("srcnn", "vdcnn", "srgan") and not self.networks:
            raise ValueError(f"{self.kind} engine needs a network payload")
        if self.kind == "pca_eigenpatch" and self.pca is None:
            raise ValueError("pca_eigenpatch engine needs a PCA model")

    @property
    def trainable(self) -> bool:
        return self.kind in TRAINABLE_KINDS

    def supports(self, factor: int) -> bool:
        if not self.trainable or self.kind == "srgan":
            return True
        return int(factor) in self.factors


def interpolation_engine(kind: str = "bicubic") -> SREngine:
    if kind not in INTERPOLATION_KINDS:
        raise ValueError(f"{kind!r} is not an interpolation kind")
    return SREngine(kind)


def _net_apply(net: Network, img: np.ndarray, margin: int = 0) -> np.ndarray:
    """Run a 1-channel network over ``img`` band by band.

    ``margin`` is the number of rows/cols the network trims from each side
    (valid convolutions). Bands overlap by the receptive field so the result
    equals a single whole-image pass.
    """
    h, w = img.shape
    halo = sum(getattr(layer, "padding", 0) for layer in net.layers)
    out = np.empty((h - 2 * margin, w - 2 * margin), np.float64)
    rows = out.shape[0]
    for r0 in range(0, rows, BAND_ROWS):
        r1 = min(rows, r0 + BAND_ROWS)
        if margin:
            src = img[r0:r1 + 2 * margin]
            out[r0:r1] = net.forward(src[None, None])[0, 0]
        else:
            # same-size nets: add a halo of context, drop it afterwards
            a, b = max(0, r0 - halo), min(h, r1 + halo)
            res = net.forward(img[a:b][None, None])[0, 0]
            out[r0:r1] = res[r0 - a:r0 - a + (r1 - r0)]
    return out


def _target_shape(lr_shape, factor, out_size):
    if out_size is not None:
        w, h = out_size
        return int(h), int(w)
    return lr_shape[0] * factor, lr_shape[1] * factor


def super_resolve(engine: SREngine, lr, factor: int, out_size: tuple[int, int] | None = None) -> np.ndarray:
    """Reconstruct an HR image from the low-resolution raster ``lr``.

    ``out_size`` is ``(width, height)``; by default ``factor`` times the input.
    """
    lr = as_gray(lr)
    factor = int(factor)
    if factor < 1:
        raise ValueError("factor must be >= 1")
    if not engine.supports(factor):
        raise UnsupportedFactorError(
            f"{engine.kind} engine was trained for factors {list(engine.factors)}, not {factor}")
    H, W = _target_shape(lr.shape, factor, out_size)
    kind = engine.kind
    if kind in INTERPOLATION_KINDS:
        out = resize(lr, W, H, kind)
    elif kind == "srcnn":
        up = resize(lr, W, H, "bicubic")
        padded = np.pad(up, SRCNN_MARGIN, mode="edge")
        out = _net_apply(engine.networks["srcnn"], padded, SRCNN_MARGIN)
    elif kind == "vdcnn":
        up = resize(lr, W, H, "bicubic")
        res = _net_apply(engine.networks["vdcnn"], up)
        out = up + res
    elif kind == "srgan":
        gen = engine.networks["generator"]
        src = lr
        if factor != SRGAN_FACTOR:
            log.warning("srgan engine is trained at factor %d; factor %d goes through bicubic rescaling",
                        SRGAN_FACTOR, factor)
            src = resize(lr, max(1, round(W / SRGAN_FACTOR)), max(1, round(H / SRGAN_FACTOR)), "bicubic")
        y = gen.forward(src[None, None])[0, 0].astype(np.float64)
        out = y if y.shape == (H, W) else resize(np.clip(y, 0, 1), W, H, "bicubic")
    else:
        model = engine.pca
        if lr.shape != tuple(model.lr_shape):
            raise ValueError(f"input {lr.shape} does not match the PCA model's LR geometry {model.lr_shape}")
        y = pca_reconstruct(model, lr)
        out = y if y.shape == (H, W) else resize(y, W, H, "bicubic")
    return np.clip(out, 0.0, 1.0)


def reconstruct_degraded(engine: SREngine, hr, factor: int) -> np.ndarray:
    """Downscale ``hr`` by ``factor`` and super-resolve back to its size."""
    hr = as_gray(hr)
    lr = downscale(hr, factor)
    h, w = hr.shape
    return super_resolve(engine, lr, factor, out_size=(w, h))


def save_engine(path, engine: SREngine) -> None:
    header = {"type": "engine", "kind": engine.kind, "factors": list(engine.factors),
              "meta": engine.meta, "history": [float(v) for v in engine.history], "networks": {}}
    arrays = []
    for name, net in engine.networks.items():
        spec, arr = network_spec(net, name)
        header["networks"][name] = spec
        arrays += arr
    if engine.pca is not None:
        header["pca"], arr = pca_arrays(engine.pca)
        arrays += arr
    write_container(path, header, arrays)


def load_engine(path) -> SREngine:
    header, arrays = read_container(path)
    if header.get("type") != "engine":
        raise ModelFormatError(f"{path}: not an engine container")
    nets = {name: network_from_spec(spec, arrays, name) for name, spec in header["networks"].items()}
    pca = pca_from_arrays(header["pca"], arrays) if "pca" in header else None
    return SREngine(header["kind"], tuple(header["factors"]), nets, pca, header.get("meta", {}),
                    list(header.get("history", [])))


def engine_digest(engine: SREngine) -> str:
    """Short fingerprint of an engine's parameters (for logs and provenance)."""
    h = hashlib.sha256(engine.kind.encode())
    for net in engine.networks.values():
        for _, _, p in net.parameters():
            h.update(np.ascontiguousarray(p, dtype="<f4").tobytes())
    if engine.pca is not None:
        h.update(np.ascontiguousarray(engine.pca.hr_patches, dtype="<f4").tobytes())
    return h.hexdigest()[:16]
