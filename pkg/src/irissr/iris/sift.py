"""SIFT keypoints (OpenCV detector/descriptor) and a ratio-test matcher."""

from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np

from ..imgcore import as_gray
from ..imgcore.io import to_uint8

N_OCTAVE_LAYERS = 3
# |D| threshold for images scaled to [0, 1]; OpenCV divides its parameter
# by the number of octave layers, so it is passed pre-multiplied
CONTRAST_THRESHOLD = 0.03
EDGE_THRESHOLD = 10.0
RATIO = 0.8


@dataclass(frozen=True)
class KeypointSet:
    keypoints: np.ndarray  # (n, 4): x, y, scale, orientation in degrees
    descriptors: np.ndarray  # (n, 128) float32, unit L2 norm

    def __len__(self):
        return len(self.keypoints)


def _detector():
    return cv2.SIFT_create(nOctaveLayers=N_OCTAVE_LAYERS,
                           contrastThreshold=CONTRAST_THRESHOLD * N_OCTAVE_LAYERS,
                           edgeThreshold=EDGE_THRESHOLD)


def sift_extract(img) -> KeypointSet:
    img = as_gray(img)
    if min(img.shape) < 32:
        raise ValueError("sift_extract needs an image of at least 32x32")
    kps, desc = _detector().detectAndCompute(to_uint8(img), None)
    if not kps or desc is None:
        return KeypointSet(np.zeros((0, 4)), np.zeros((0, 128), np.float32))
    pts = np.array([(k.pt[0], k.pt[1], k.size, k.angle) for k in kps], dtype=np.float64)
    desc = desc.astype(np.float32)
    desc /= np.maximum(np.linalg.norm(desc, axis=1, keepdims=True), 1e-12)
    # OpenCV may return keypoints in a platform-dependent order
    order = np.lexsort((pts[:, 3], pts[:, 2], pts[:, 0], pts[:, 1]))
    return KeypointSet(pts[order], desc[order])


def sift_match(a: KeypointSet, b: KeypointSet, ratio: float = RATIO) -> float:
    """Fraction of ratio-test matches, normalized by the smaller set size.

    Each descriptor of ``b`` is counted at most once, so the score is in [0, 1].
    """
    if len(a) == 0 or len(b) == 0:
        return 0.0
    da = a.descriptors.astype(np.float64)
    db = b.descriptors.astype(np.float64)
    d2 = np.maximum((da * da).sum(1)[:, None] + (db * db).sum(1)[None] - 2 * da @ db.T, 0.0)
    dist = np.sqrt(d2)
    nearest = np.argmin(dist, axis=1)
    d1 = dist[np.arange(len(da)), nearest]
    if len(db) > 1:
        part = np.partition(dist, 1, axis=1)
        ok = d1 < ratio * part[:, 1]
    else:
        ok = np.ones(len(da), bool)
    return len(np.unique(nearest[ok])) / min(len(a), len(b))
