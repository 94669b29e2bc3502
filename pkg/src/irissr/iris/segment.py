"""Circular pupil/iris segmentation and ground-truth sidecars.

Pupil: dark-region threshold, then a gradient-directed circular Hough vote
on the threshold boundary. Iris: integro-differential search for the
radius (and a small neighbourhood of centres around the pupil centre) that
maximizes the smoothed radial derivative of the circular mean intensity.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..imgcore import as_gray


@dataclass(frozen=True)
class Circle:
    cx: float
    cy: float
    r: float

    def translated(self, dx: float, dy: float) -> "Circle":
        return Circle(self.cx + dx, self.cy + dy, self.r)


@dataclass(frozen=True)
class SegmentationResult:
    pupil: Circle
    iris: Circle
    usable: bool = True

    def __post_init__(self):
        if self.usable:
            check_circles(self.pupil, self.iris)


class SegmentationError(ValueError):
    pass


def check_circles(pupil: Circle, iris: Circle) -> None:
    if not (pupil.r > 0 and iris.r > 0):
        raise SegmentationError("circle radii must be positive")
    if pupil.r >= iris.r:
        raise SegmentationError(f"pupil radius {pupil.r} must be smaller than iris radius {iris.r}")
    if np.hypot(pupil.cx - iris.cx, pupil.cy - iris.cy) >= iris.r:
        raise SegmentationError("pupil centre lies outside the iris circle")


UNUSABLE = SegmentationResult(Circle(0, 0, 0), Circle(0, 0, 0), usable=False)


@dataclass
class SegmentConfig:
    pupil_percentile: float = 1.0  # reference dark level
    pupil_margin: float = 0.12  # threshold = dark level + margin
    min_pupil_r: int = 6
    max_pupil_frac: float = 0.35  # of the smaller image side
    min_vote_ratio: float = 0.35  # Hough votes / circumference
    iris_ratio: tuple[float, float] = (1.4, 4.0)  # iris radius range in pupil radii
    center_search: int = 3  # iris centre offsets tried around the pupil centre, px
    min_iris_jump: float = 0.03  # smoothed intensity step at the iris boundary
    n_angles: int = 180


def _hough_pupil(img: np.ndarray, cfg: SegmentConfig):
    h, w = img.shape
    smooth = ndimage.gaussian_filter(img, 1.0)
    dark = np.percentile(smooth, cfg.pupil_percentile)
    binary = smooth < dark + cfg.pupil_margin
    binary = ndimage.binary_opening(binary, iterations=2)
    if not binary.any() or binary.all():
        return None
    # keep the largest dark component
    labels, n = ndimage.label(binary)
    sizes = ndimage.sum(binary, labels, range(1, n + 1))
    binary = labels == (1 + int(np.argmax(sizes)))
    edge = binary & ~ndimage.binary_erosion(binary)
    ys, xs = np.nonzero(edge)
    if len(ys) < 8:
        return None
    mask_f = ndimage.gaussian_filter(binary.astype(float), 1.5)
    gy = ndimage.sobel(mask_f, axis=0)[ys, xs]
    gx = ndimage.sobel(mask_f, axis=1)[ys, xs]
    norm = np.hypot(gx, gy)
    ok = norm > 1e-9
    ys, xs, gx, gy, norm = ys[ok], xs[ok], gx[ok], gy[ok], norm[ok]
    # the mask gradient points into the dark disc, i.e. toward the centre
    ux, uy = gx / norm, gy / norm
    r_max = int(min(h, w) * cfg.max_pupil_frac)
    radii = np.arange(cfg.min_pupil_r, max(cfg.min_pupil_r + 1, r_max + 1))
    acc = np.zeros((len(radii), h, w))
    for k, r in enumerate(radii):
        cy = np.rint(ys + r * uy).astype(int)
        cx = np.rint(xs + r * ux).astype(int)
        inside = (cy >= 0) & (cy < h) & (cx >= 0) & (cx < w)
        np.add.at(acc[k], (cy[inside], cx[inside]), 1.0)
    # votes that miss by one pixel or one radius step still count
    acc = ndimage.uniform_filter(acc, size=3, mode="constant") * 27
    score = acc / (2 * np.pi * radii)[:, None, None]
    k, cy, cx = np.unravel_index(int(np.argmax(score)), score.shape)
    if score[k, cy, cx] < cfg.min_vote_ratio:
        return None
    win = acc[k, max(cy - 1, 0):cy + 2, max(cx - 1, 0):cx + 2]
    oy, ox = np.mgrid[max(cy - 1, 0):cy + 2, max(cx - 1, 0):cx + 2]
    fy = float((win * oy).sum() / win.sum())
    fx = float((win * ox).sum() / win.sum())
    return Circle(fx, fy, _refine_radius(img, fx, fy, float(radii[k]), cfg.n_angles))


def _refine_radius(img, cx, cy, r0, n_angles):
    """Radius of the steepest dark-to-bright circular-mean step near ``r0``."""
    radii = np.arange(max(1.0, 0.75 * r0), 1.25 * r0 + 1, 0.25)
    prof = _circular_means(img, cx, cy, radii, n_angles)
    valid = np.isfinite(prof)
    if valid.sum() < 5:
        return r0
    prof = np.interp(radii, radii[valid], prof[valid])
    deriv = np.gradient(ndimage.gaussian_filter1d(prof, 2.0))
    return float(radii[int(np.argmax(deriv))])


def _circular_means(img: np.ndarray, cx: float, cy: float, radii: np.ndarray, n_angles: int) -> np.ndarray:
    theta = 2 * np.pi * (np.arange(n_angles) + 0.5) / n_angles
    xs = cx + radii[:, None] * np.cos(theta)[None]
    ys = cy + radii[:, None] * np.sin(theta)[None]
    vals = ndimage.map_coordinates(img, [ys, xs], order=1, mode="constant", cval=np.nan)
    with np.errstate(invalid="ignore"):
        return np.nanmean(np.where(np.isfinite(vals), vals, np.nan), axis=1)


def _iris_search(img: np.ndarray, pupil: Circle, cfg: SegmentConfig):
    h, w = img.shape
    r_lo = pupil.r * cfg.iris_ratio[0]
    r_hi = pupil.r * cfg.iris_ratio[1]
    radii = np.arange(r_lo, r_hi, 0.5)
    if len(radii) < 5:
        return None
    best = (-np.inf, None)
    offs = range(-cfg.center_search, cfg.center_search + 1)
    for dy in offs:
        for dx in offs:
            cx, cy = pupil.cx + dx, pupil.cy + dy
            prof = _circular_means(img, cx, cy, radii, cfg.n_angles)
            valid = np.isfinite(prof)
            if valid.sum() < 5:
                continue
            prof = np.interp(radii, radii[valid], prof[valid])
            deriv = ndimage.gaussian_filter1d(prof, 2.0, order=1) / 0.5
            j = int(np.argmax(deriv[2:-2])) + 2
            jump = float(prof[min(j + 6, len(prof) - 1)] - prof[max(j - 6, 0)])
            if deriv[j] > best[0]:
                best = (deriv[j], (Circle(cx, cy, float(radii[j])), jump))
    if best[1] is None:
        return None
    circle, jump = best[1]
    return circle if jump >= cfg.min_iris_jump else None


def segment(img, cfg: SegmentConfig | None = None) -> SegmentationResult:
    """Locate pupil and iris circles; ``usable`` is False when either fails."""
    cfg = cfg or SegmentConfig()
    img = np.asarray(as_gray(img), dtype=np.float64)
    if min(img.shape) < 64:
        raise ValueError("segmentation needs an image of at least 64x64")
    if np.ptp(img) < 1e-6:
        return UNUSABLE
    pupil = _hough_pupil(img, cfg)
    if pupil is None:
        return UNUSABLE
    iris = _iris_search(img, pupil, cfg)
    if iris is None:
        return UNUSABLE
    try:
        return SegmentationResult(pupil, iris, True)
    except SegmentationError:
        return UNUSABLE


def sidecar_path(image_path) -> str:
    return os.path.splitext(os.fspath(image_path))[0] + ".seg.csv"


def load_segmentation(path) -> SegmentationResult:
    """Read a two-line ``cx,cy,r`` sidecar (pupil first, then iris)."""
    path = os.fspath(path)
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if len(lines) != 2:
        raise SegmentationError(f"{path}: expected 2 circle lines, found {len(lines)}")
    circles = []
    for ln in lines:
        parts = ln.split(",")
        try:
            vals = [float(p) for p in parts]
        except ValueError:
            raise SegmentationError(f"{path}: malformed line {ln!r}") from None
        if len(vals) != 3 or not all(np.isfinite(vals)):
            raise SegmentationError(f"{path}: malformed line {ln!r}")
        circles.append(Circle(*vals))
    return SegmentationResult(circles[0], circles[1], True)


def save_segmentation(path, seg: SegmentationResult) -> None:
    with open(path, "w") as fh:
        for c in (seg.pupil, seg.iris):
            fh.write(f"{c.cx:.6f},{c.cy:.6f},{c.r:.6f}\n")
