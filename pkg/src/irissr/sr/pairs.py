"""Training-pair preparation for the learned SR engines."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..imgcore import degrade, downscale, load_image


@dataclass(frozen=True)
class TrainingPair:
    lr_patch: np.ndarray
    hr_patch: np.ndarray
    factor: int


@dataclass
class PairSet:
    """Stacked training pairs: ``lr`` and ``hr`` are (N, h, w) float32."""

    lr: np.ndarray
    hr: np.ndarray
    factors: np.ndarray

    def __len__(self):
        return len(self.factors)

    def __getitem__(self, i) -> TrainingPair:
        return TrainingPair(self.lr[i], self.hr[i], int(self.factors[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def subset(self, idx) -> "PairSet":
        return PairSet(self.lr[idx], self.hr[idx], self.factors[idx])

    def with_factors(self, keep) -> "PairSet":
        return self.subset(np.isin(self.factors, list(keep)))


def _as_images(images):
    out = []
    for item in images:
        out.append(load_image(item) if isinstance(item, (str, bytes)) or hasattr(item, "__fspath__")
                   else np.asarray(item, dtype=np.float64))
    return out


def _dihedral(a: np.ndarray, k: int) -> np.ndarray:
    """The k-th of the 8 flips/rotations of a square patch (k = 0 is the identity)."""
    a = np.rot90(a, k % 4)
    return a[:, ::-1] if k >= 4 else a


def prepare_pairs(images, factors, patch: int = 33, stride: int = 14, budget: int | None = None,
                  seed: int = 0, mode: str = "sr", augment: bool = False) -> PairSet:
    """Cut aligned HR/LR patch pairs and sample a seeded subset.

    Each image is degraded whole and patches are cut from the degraded and
    original rasters at the same place, so training inputs look exactly like
    what the engine sees at inference time. ``mode="sr"`` keeps both patches
    at the HR raster size (input is the bicubic down-then-up image).
    ``mode="srgan"`` keeps the raw low-resolution raster (``patch // factor``
    wide) as input; patch origins are snapped to multiples of the factor.

    With ``augment`` every patch position also appears under the 7 other
    flips/rotations (applied to both sides of the pair) before sampling.
    """
    images = _as_images(images)
    if not images:
        raise ValueError("empty manifest")
    factors = [int(f) for f in np.atleast_1d(factors)]
    if mode not in ("sr", "srgan"):
        raise ValueError(f"unknown mode {mode!r}")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if mode == "srgan":
        if len(factors) != 1:
            raise ValueError("srgan pairs use a single factor")
        if patch % factors[0]:
            raise ValueError(f"srgan patch {patch} must be a multiple of the factor {factors[0]}")
    for img in images:
        if patch > min(img.shape):
            raise ValueError(f"patch {patch} larger than image {img.shape[1]}x{img.shape[0]}")

    # enumerate (image, y, x, factor, transform) candidates first; only sampled ones are cut
    cand = []
    for k, img in enumerate(images):
        h, w = img.shape
        for f in factors:
            snap = f if mode == "srgan" else 1
            ys = np.unique(np.arange(0, h - patch + 1, stride) // snap * snap)
            xs = np.unique(np.arange(0, w - patch + 1, stride) // snap * snap)
            yy, xx, tt = np.meshgrid(ys, xs, np.arange(8 if augment else 1), indexing="ij")
            cand.append(np.stack([np.full(yy.size, k), yy.ravel(), xx.ravel(), np.full(yy.size, f),
                                  tt.ravel()], 1))
    cand = np.concatenate(cand)
    rng = np.random.default_rng(seed)
    cand = cand[rng.permutation(len(cand))]
    if budget is not None:
        cand = cand[:budget]

    lp = patch if mode == "sr" else patch // factors[0]
    hr = np.empty((len(cand), patch, patch), np.float32)
    lr = np.empty((len(cand), lp, lp), np.float32)
    cache = {}
    for i, (k, y, x, f, t) in enumerate(cand):
        if (k, f) not in cache:
            cache[k, f] = degrade(images[k], f) if mode == "sr" else downscale(images[k], f)
        hr[i] = _dihedral(images[k][y:y + patch, x:x + patch], t)
        if mode == "sr":
            lr[i] = _dihedral(cache[k, f][y:y + patch, x:x + patch], t)
        else:
            lr[i] = _dihedral(cache[k, f][y // f:y // f + lp, x // f:x // f + lp], t)
    return PairSet(lr=lr, hr=hr, factors=cand[:, 3].astype(int))
