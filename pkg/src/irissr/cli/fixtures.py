"""Synthetic data: procedural textures and concentric-circle eyes.

Everything here is seeded so that the whole acceptance suite runs without
external images.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..imgcore import save_image


def _smooth_noise(rng: np.random.Generator, shape, sigma: float, wrap_cols: bool = False) -> np.ndarray:
    noise = rng.normal(size=shape)
    mode = ("reflect", "wrap") if wrap_cols else "reflect"
    out = ndimage.gaussian_filter(noise, sigma, mode=mode)
    out -= out.mean()
    return out / (out.std() + 1e-12)


def _soft_disk(yy, xx, cy, cx, r, edge=0.7):
    d = np.hypot(yy - cy, xx - cx) - r
    return np.clip(0.5 - d / edge, 0.0, 1.0)


def texture_image(rng: np.random.Generator, size: int = 96) -> np.ndarray:
    """Piecewise-smooth texture: noise background, stripes, sharp-edged shapes."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    img = 0.5 + 0.08 * _smooth_noise(rng, (size, size), rng.uniform(2.0, 6.0))
    # an oriented grating with a random period
    theta = rng.uniform(0, np.pi)
    period = rng.uniform(4.0, 14.0)
    phase = (xx * np.cos(theta) + yy * np.sin(theta)) * 2 * np.pi / period
    mask = _smooth_noise(rng, (size, size), 10.0) > 0.0
    img += mask * 0.15 * np.sin(phase)
    for _ in range(int(rng.integers(4, 9))):
        level = rng.uniform(-0.35, 0.35)
        if rng.random() < 0.5:
            shape = _soft_disk(yy, xx, *rng.uniform(0, size, 2), rng.uniform(4, size / 4))
        else:
            # rotated rectangle with antialiased borders
            cy, cx = rng.uniform(0, size, 2)
            hh, hw = rng.uniform(3, size / 5, 2)
            a = rng.uniform(0, np.pi)
            u = (xx - cx) * np.cos(a) + (yy - cy) * np.sin(a)
            v = -(xx - cx) * np.sin(a) + (yy - cy) * np.cos(a)
            shape = np.clip(0.5 - (np.maximum(np.abs(u) - hw, np.abs(v) - hh)) / 0.7, 0, 1)
        img = img * (1 - shape) + (img + level) * shape
    return np.clip(img, 0.0, 1.0)


def texture_corpus(n: int, size: int = 96, seed: int = 0) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    return [texture_image(rng, size) for _ in range(n)]


@dataclass(frozen=True)
class EyeGeometry:
    size: int = 192
    pupil_r: float = 24.0
    iris_r: float = 72.0
    pupil_level: float = 0.06
    sclera_level: float = 0.82


def subject_texture(rng: np.random.Generator, rows: int = 64, cols: int = 512) -> np.ndarray:
    """Random polar iris texture (radius x angle), periodic along the angle."""
    coarse = _smooth_noise(rng, (rows, cols), (3.0, 5.0), wrap_cols=True)
    fine = _smooth_noise(rng, (rows, cols), (1.5, 2.5), wrap_cols=True)
    return np.clip(0.42 + 0.10 * coarse + 0.06 * fine, 0.0, 1.0)


def render_eye(texture: np.ndarray, geom: EyeGeometry = EyeGeometry(), center=None,
               rotation: float = 0.0, noise: float = 0.0, rng: np.random.Generator | None = None):
    """Render a frontal eye whose annulus samples ``texture`` in polar coordinates.

    ``rotation`` is in radians. Returns the image and its pupil/iris circles.
    """
    size = geom.size
    cy, cx = center if center is not None else ((size - 1) / 2, (size - 1) / 2)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    r = np.hypot(yy - cy, xx - cx)
    ang = np.mod(np.arctan2(yy - cy, xx - cx) - rotation, 2 * np.pi)
    rows, cols = texture.shape
    t = (r - geom.pupil_r) / (geom.iris_r - geom.pupil_r)
    ti = np.clip(t * rows - 0.5, 0, rows - 1)
    tj = ang / (2 * np.pi) * cols - 0.5
    # bilinear lookup, wrapping along the angle
    iris = ndimage.map_coordinates(np.pad(texture, ((0, 0), (0, 1)), mode="wrap"),
                                   [ti, np.mod(tj, cols)], order=1, mode="nearest")
    img = np.full((size, size), geom.sclera_level)
    iris_w = _soft_disk(yy, xx, cy, cx, geom.iris_r)
    pupil_w = _soft_disk(yy, xx, cy, cx, geom.pupil_r)
    img = img * (1 - iris_w) + iris * iris_w
    img = img * (1 - pupil_w) + geom.pupil_level * pupil_w
    if noise:
        rng = rng or np.random.default_rng(0)
        img = img + rng.normal(0, noise, img.shape)
    circles = ((cx, cy, geom.pupil_r), (cx, cy, geom.iris_r))
    return np.clip(img, 0.0, 1.0), circles


@dataclass(frozen=True)
class EyeSample:
    subject: str
    eye: str
    sample: int
    image: np.ndarray
    pupil: tuple
    iris: tuple


def eye_dataset(n_subjects: int = 20, n_samples: int = 4, seed: int = 0,
                geom: EyeGeometry = EyeGeometry(), max_rotation_deg: float = 2.0,
                max_shift: float = 4.0, noise: float = 0.015) -> list[EyeSample]:
    rng = np.random.default_rng(seed)
    out = []
    for s in range(n_subjects):
        tex = subject_texture(rng)
        for k in range(n_samples):
            rot = np.deg2rad(rng.uniform(-max_rotation_deg, max_rotation_deg))
            dy, dx = rng.uniform(-max_shift, max_shift, 2)
            c = ((geom.size - 1) / 2 + dy, (geom.size - 1) / 2 + dx)
            img, (pupil, iris) = render_eye(tex, geom, c, rot, noise, rng)
            out.append(EyeSample(f"s{s:03d}", "L", k, img, pupil, iris))
    return out


def write_sidecar(path, pupil, iris) -> None:
    with open(path, "w") as fh:
        for cx, cy, r in (pupil, iris):
            fh.write(f"{cx:.6f},{cy:.6f},{r:.6f}\n")


def write_eye_fixtures(out_dir, n_subjects: int = 20, n_samples: int = 4, seed: int = 0,
                       enroll_samples: int = 1) -> dict[str, str]:
    """Write PNG eyes, segmentation sidecars and enroll/probe/all manifests.

    The first ``enroll_samples`` samples of each subject form the enrolment
    manifest and the rest the probe manifest. Returns the manifest paths.
    """
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    for item in eye_dataset(n_subjects, n_samples, seed):
        name = f"{item.subject}_{item.eye}_{item.sample}.png"
        path = os.path.join(out_dir, name)
        save_image(path, item.image)
        write_sidecar(os.path.splitext(path)[0] + ".seg.csv", item.pupil, item.iris)
        rows.append((name, item.subject, item.eye, item.sample))
    paths = {}
    for role, keep in (("all", lambda r: True), ("enroll", lambda r: r[3] < enroll_samples),
                       ("probe", lambda r: r[3] >= enroll_samples)):
        p = os.path.join(out_dir, f"{role}.csv")
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["path", "subject", "eye", "sample"])
            w.writerows(r for r in rows if keep(r))
        paths[role] = p
    return paths


def write_texture_fixtures(out_dir, n: int = 32, size: int = 96, seed: int = 0,
                           n_train: int | None = None) -> dict[str, str]:
    """Write texture PNGs with train/test manifests (default split 3:1)."""
    os.makedirs(out_dir, exist_ok=True)
    n_train = n_train if n_train is not None else (3 * n) // 4
    rows = []
    for i, img in enumerate(texture_corpus(n, size, seed)):
        name = f"tex{i:03d}.png"
        save_image(os.path.join(out_dir, name), img)
        rows.append((name, f"t{i:03d}", "-", 0))
    paths = {}
    for role, part in (("train", rows[:n_train]), ("test", rows[n_train:])):
        p = os.path.join(out_dir, f"{role}.csv")
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["path", "subject", "eye", "sample"])
            w.writerows(part)
        paths[role] = p
    return paths
