"""Genuine/impostor pairing, EER, ROC and score histograms."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

POLARITIES = ("distance", "similarity")


@dataclass
class ScoreSet:
    genuine: np.ndarray
    impostor: np.ndarray
    polarity: str = "distance"
    genuine_pairs: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), int))
    impostor_pairs: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), int))

    def __post_init__(self):
        if self.polarity not in POLARITIES:
            raise ValueError(f"polarity must be one of {POLARITIES}")
        self.genuine = np.asarray(self.genuine, dtype=np.float64).ravel()
        self.impostor = np.asarray(self.impostor, dtype=np.float64).ravel()

    @property
    def counts(self) -> tuple[int, int]:
        return len(self.genuine), len(self.impostor)

    def _check(self):
        if len(self.genuine) == 0 or len(self.impostor) == 0:
            raise ValueError("both genuine and impostor scores are required")

    def as_distance(self) -> tuple[np.ndarray, np.ndarray]:
        """Scores oriented so that smaller means 'same subject'."""
        if self.polarity == "distance":
            return self.genuine, self.impostor
        return -self.genuine, -self.impostor


def enumerate_pairs(labels, against=None) -> tuple[np.ndarray, np.ndarray]:
    """Index pairs ``(i, j)`` split into genuine and impostor.

    Without ``against`` every unordered pair ``i < j`` of ``labels`` is used.
    With ``against`` (enrolment labels) every (probe i, enrolment j) pair is used.
    """
    labels = np.asarray(labels)
    if against is None:
        i, j = np.triu_indices(len(labels), k=1)
        same = labels[i] == labels[j]
    else:
        against = np.asarray(against)
        i, j = np.meshgrid(np.arange(len(labels)), np.arange(len(against)), indexing="ij")
        i, j = i.ravel(), j.ravel()
        same = labels[i] == against[j]
    pairs = np.stack([i, j], axis=1)
    return pairs[same], pairs[~same]


def pair_counts(labels) -> tuple[int, int]:
    """Genuine and impostor counts of the all-pairs protocol, from class sizes only."""
    _, n = np.unique(np.asarray(labels), return_counts=True)
    total = len(labels) * (len(labels) - 1) // 2
    genuine = int(np.sum(n * (n - 1) // 2))
    return genuine, total - genuine


def pair_scores(templates, matcher, policy="all", polarity: str = "distance",
                against=None) -> ScoreSet:
    """Score all genuine pairs and all (or a seeded sample of) impostor pairs.

    ``templates`` and ``against`` are sequences of ``(label, template)``;
    ``policy`` is ``"all"`` or ``("sampled", n, seed)``.
    """
    labels = [t[0] for t in templates]
    items = [t[1] for t in templates]
    ref_labels = [t[0] for t in against] if against is not None else None
    ref_items = [t[1] for t in against] if against is not None else items
    if len(set(labels) | set(ref_labels or [])) < 2:
        raise ValueError("pair_scores needs at least two subjects")
    gen, imp = enumerate_pairs(labels, ref_labels)
    if len(gen) == 0:
        raise ValueError("no genuine pairs possible: every subject has a single template")
    if policy != "all":
        kind, n, seed = policy
        if kind != "sampled":
            raise ValueError(f"unknown pairing policy {policy!r}")
        if n < len(imp):
            rng = np.random.default_rng(seed)
            imp = imp[np.sort(rng.choice(len(imp), size=int(n), replace=False))]
    g = np.array([matcher(items[i], ref_items[j]) for i, j in gen], dtype=np.float64)
    m = np.array([matcher(items[i], ref_items[j]) for i, j in imp], dtype=np.float64)
    return ScoreSet(g, m, polarity, gen, imp)


def roc_curve(scores: ScoreSet) -> np.ndarray:
    """Rows ``(far, frr, threshold)`` over every distinct threshold, ascending.

    For distances a comparison is accepted when ``score <= threshold``; for
    similarities when ``score >= threshold`` (thresholds are then reported in
    the similarity scale). A leading ``-inf`` (distance) row accepts nothing,
    so both endpoints (FAR 0, FRR 1) and (FAR 1, FRR 0) are present.
    """
    scores._check()
    g, m = scores.as_distance()
    thr = np.concatenate([[-np.inf], np.unique(np.concatenate([g, m]))])
    gs, ms = np.sort(g), np.sort(m)
    far = np.searchsorted(ms, thr, side="right") / len(ms)
    frr = (len(gs) - np.searchsorted(gs, thr, side="right")) / len(gs)
    if scores.polarity == "similarity":
        thr = -thr
    return np.stack([far, frr, thr], axis=1)


def compute_eer(scores: ScoreSet) -> float:
    """FAR = FRR crossing, linearly interpolated between adjacent thresholds."""
    roc = roc_curve(scores)
    far, frr = roc[:, 0], roc[:, 1]
    d = far - frr  # non-decreasing along the sweep, from -1 to +1
    k = int(np.searchsorted(d, 0.0, side="left"))
    if d[k] == 0.0:
        # FAR equals FRR exactly at this threshold
        return float(far[k])
    d0, d1 = d[k - 1], d[k]
    t = -d0 / (d1 - d0)
    return float(far[k - 1] + t * (far[k] - far[k - 1]))


def brute_force_eer(genuine, impostor, polarity: str = "distance") -> float:
    """O(n^2) reference sweep used for cross-checking ``compute_eer``."""
    g = np.asarray(genuine, float)
    m = np.asarray(impostor, float)
    if polarity == "similarity":
        g, m = -g, -m
    thr = [-np.inf] + sorted(set(g.tolist()) | set(m.tolist()))
    pts = []
    for t in thr:
        far = sum(1 for s in m if s <= t) / len(m)
        frr = sum(1 for s in g if s > t) / len(g)
        pts.append((far, frr))
    for (f0, r0), (f1, r1) in zip(pts, pts[1:]):
        if f0 - r0 == 0:
            return f0
        if (f0 - r0) < 0 <= (f1 - r1):
            if f1 - r1 == 0:
                return f1
            d0, d1 = f0 - r0, f1 - r1
            return f0 + (-d0 / (d1 - d0)) * (f1 - f0)
    return pts[-1][0]


@dataclass
class Histogram:
    edges: np.ndarray
    genuine: np.ndarray  # densities
    impostor: np.ndarray

    @property
    def width(self) -> np.ndarray:
        return np.diff(self.edges)


def histogram(scores: ScoreSet, bins: int = 100) -> Histogram:
    """Per-class densities over shared edges spanning the combined score range."""
    scores._check()
    if bins < 2:
        raise ValueError("bins must be >= 2")
    allv = np.concatenate([scores.genuine, scores.impostor])
    lo, hi = float(allv.min()), float(allv.max())
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, bins + 1)
    g, _ = np.histogram(scores.genuine, edges, density=True)
    m, _ = np.histogram(scores.impostor, edges, density=True)
    return Histogram(edges, g, m)
