"""Position-patch eigen-transformation hallucination.

For every patch position on the low-resolution grid the model keeps the
collocated training patches of all M training images. An input patch is
projected onto the eigen-patches of the (centred) LR set; the eigen-space
weights are turned into combination weights over the M training patches
and the same combination of the collocated HR patches is the output.
Overlapping outputs are averaged uniformly.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from ..imgcore import downscale

log = logging.getLogger(__name__)

# eigenvalues below this fraction of the largest one are treated as zero
RANK_TOL = 1e-10


@dataclass
class PCAEigenPatchModel:
    factor: int
    patch_size: int
    overlap: int
    lr_shape: tuple[int, int]
    hr_shape: tuple[int, int]
    padded_lr: tuple[int, int]
    positions: np.ndarray  # (P, 2) top-left LR coordinates
    lr_mean: np.ndarray  # (P, p*p)
    eigenpatches: np.ndarray  # (P, p*p, K) zero columns beyond each position's rank
    eigvals: np.ndarray  # (P, K) descending, zero-padded
    projections: np.ndarray  # (P, K, M) training-patch coordinates in eigen-space
    hr_patches: np.ndarray  # (P, M, (p*f)^2)

    @property
    def n_train(self) -> int:
        return self.hr_patches.shape[1]

    def ranks(self) -> np.ndarray:
        return (self.eigvals > 0).sum(axis=1)


def _fit_extent(n_lr: int, n_hr: int, factor: int, p: int, step: int) -> int:
    need = max(n_lr, -(-n_hr // factor), p)
    extra = (need - p) % step
    return need + (step - extra if extra else 0)


def _pad_to(img: np.ndarray, h: int, w: int) -> np.ndarray:
    return np.pad(img, ((0, h - img.shape[0]), (0, w - img.shape[1])), mode="edge")


def _patch_grid(p_lr: int, extent: int, step: int) -> np.ndarray:
    return np.arange(0, extent - p_lr + 1, step)


def pca_train(hr_images, factor: int, patch_size: int = 8, overlap: int = 4) -> PCAEigenPatchModel:
    images = [np.asarray(im, dtype=np.float64) for im in hr_images]
    if not images:
        raise ValueError("pca_train needs at least one training image")
    shape = images[0].shape
    if any(im.shape != shape for im in images):
        raise ValueError("all training images must share dimensions")
    step = patch_size - overlap
    if step < 1 or overlap < 0:
        raise ValueError("overlap must lie in [0, patch_size)")
    if len(images) < 2:
        log.warning("pca_train: a single training image gives a rank-0 model (mean only)")

    H, W = shape
    lr = [downscale(im, factor) for im in images]
    lh, lw = lr[0].shape
    Lh = _fit_extent(lh, H, factor, patch_size, step)
    Lw = _fit_extent(lw, W, factor, patch_size, step)
    lr_stack = np.stack([_pad_to(x, Lh, Lw) for x in lr])
    hr_stack = np.stack([_pad_to(x, Lh * factor, Lw * factor) for x in images])

    ys, xs = _patch_grid(patch_size, Lh, step), _patch_grid(patch_size, Lw, step)
    positions = np.array([(y, x) for y in ys for x in xs])
    M = len(images)
    ph = patch_size * factor
    means, bases, vals, projs, hrs = [], [], [], [], []
    for y, x in positions:
        L = lr_stack[:, y:y + patch_size, x:x + patch_size].reshape(M, -1)
        Hp = hr_stack[:, y * factor:y * factor + ph, x * factor:x * factor + ph].reshape(M, -1)
        mean = L.mean(axis=0)
        Lc = L - mean
        gram = Lc @ Lc.T
        lam, V = np.linalg.eigh(gram)
        lam, V = lam[::-1], V[:, ::-1]
        keep = lam > max(lam[0], 0.0) * RANK_TOL if M > 1 else np.zeros(M, bool)
        keep &= lam > 1e-14
        lam, V = lam[keep], V[:, keep]
        E = Lc.T @ V / np.sqrt(lam)  # unit-norm eigen-patches
        means.append(mean)
        bases.append(E)
        vals.append(lam)
        projs.append(E.T @ Lc.T)
        hrs.append(Hp)
    K = max(1, max(len(v) for v in vals))
    P = len(positions)
    eig = np.zeros((P, patch_size**2, K))
    lam_all = np.zeros((P, K))
    proj = np.zeros((P, K, M))
    for i, (E, lam, pr) in enumerate(zip(bases, vals, projs)):
        k = len(lam)
        eig[i, :, :k] = E
        lam_all[i, :k] = lam
        proj[i, :k] = pr
    if not lam_all.any():
        log.warning("pca_train: every patch position has rank 0; the model stores means only")
    return PCAEigenPatchModel(
        factor=factor, patch_size=patch_size, overlap=overlap, lr_shape=(lh, lw), hr_shape=(H, W),
        padded_lr=(Lh, Lw), positions=positions,
        lr_mean=np.array(means, np.float32), eigenpatches=eig.astype(np.float32),
        eigvals=lam_all.astype(np.float32), projections=proj.astype(np.float32),
        hr_patches=np.array(hrs, np.float32))


def combination_weights(model: PCAEigenPatchModel, i: int, patch: np.ndarray) -> np.ndarray:
    """Weights over the M training patches at position ``i`` (they sum to 1)."""
    lam = model.eigvals[i].astype(np.float64)
    E = model.eigenpatches[i].astype(np.float64)
    w = E.T @ (patch.ravel() - model.lr_mean[i])
    inv = np.divide(1.0, lam, out=np.zeros_like(lam), where=lam > 0)
    c = model.projections[i].astype(np.float64).T @ (w * inv)
    M = model.n_train
    return c + (1.0 - c.sum()) / M


def pca_reconstruct(model: PCAEigenPatchModel, lr_image: np.ndarray) -> np.ndarray:
    lr_image = np.asarray(lr_image, dtype=np.float64)
    if lr_image.shape != tuple(model.lr_shape):
        raise ValueError(f"input {lr_image.shape} does not match training LR geometry {model.lr_shape}")
    p, f = model.patch_size, model.factor
    Lh, Lw = model.padded_lr
    padded = _pad_to(lr_image, Lh, Lw)
    acc = np.zeros((Lh * f, Lw * f))
    count = np.zeros_like(acc)
    ph = p * f
    for i, (y, x) in enumerate(model.positions):
        c = combination_weights(model, i, padded[y:y + p, x:x + p])
        yi = c @ model.hr_patches[i].astype(np.float64)
        acc[y * f:y * f + ph, x * f:x * f + ph] += yi.reshape(ph, ph)
        count[y * f:y * f + ph, x * f:x * f + ph] += 1.0
    H, W = model.hr_shape
    out = acc[:H, :W] / count[:H, :W]
    return np.clip(out, 0.0, 1.0)


def pca_arrays(model: PCAEigenPatchModel) -> tuple[dict, list]:
    header = {"factor": model.factor, "patch_size": model.patch_size, "overlap": model.overlap,
              "lr_shape": list(model.lr_shape), "hr_shape": list(model.hr_shape),
              "padded_lr": list(model.padded_lr)}
    arrays = [("pca/positions", model.positions.astype(np.float32)),
              ("pca/lr_mean", model.lr_mean), ("pca/eigenpatches", model.eigenpatches),
              ("pca/eigvals", model.eigvals), ("pca/projections", model.projections),
              ("pca/hr_patches", model.hr_patches)]
    return header, arrays


def pca_from_arrays(header: dict, arrays: dict) -> PCAEigenPatchModel:
    return PCAEigenPatchModel(
        factor=header["factor"], patch_size=header["patch_size"], overlap=header["overlap"],
        lr_shape=tuple(header["lr_shape"]), hr_shape=tuple(header["hr_shape"]),
        padded_lr=tuple(header["padded_lr"]),
        positions=arrays["pca/positions"].astype(int), lr_mean=arrays["pca/lr_mean"],
        eigenpatches=arrays["pca/eigenpatches"], eigvals=arrays["pca/eigvals"],
        projections=arrays["pca/projections"], hr_patches=arrays["pca/hr_patches"])


def lr_geometry(hr_shape, factor: int) -> tuple[int, int]:
    return (math.floor(hr_shape[0] / factor), math.floor(hr_shape[1] / factor))
