"""Train / super-resolve / assess / verify stages and the full experiment sweep."""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..eval import (ReportRow, ScoreSet, compute_eer, histogram, histogram_svg, pair_scores,
                    quality_report, roc_curve, roc_svg, write_report_csv, write_scores_csv)
from ..eval.report import write_text
from ..imgcore import downscale, load_image
from ..iris import (ENCODERS, SegmentationResult, hamming_distance, load_segmentation, normalize,
                    segment, sidecar_path, sift_extract, sift_match)
from ..sr import (SREngine, interpolation_engine, load_engine, prepare_pairs, super_resolve,
                  train_pca, train_srcnn, train_srgan, train_vdcnn)
from ..sr.engine import INTERPOLATION_KINDS, SRGAN_FACTOR
from .config import EngineSpec, ExperimentConfig, config_digest
from .manifest import ManifestEntry, load_manifest, manifest_digest

log = logging.getLogger(__name__)

DEFAULT_PATCH = {"srcnn": 33, "vdcnn": 41, "srgan": 96}
POLARITY = {"gabor": "distance", "qsw": "distance", "sift": "similarity"}
ORIGINAL = "original"


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("IRIS_SR_THREADS", "1")))
    except ValueError:
        return 1


def parallel_map(fn, items):
    """Ordered map over a thread pool capped by ``IRIS_SR_THREADS``."""
    n = worker_count()
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def quantize8(img: np.ndarray) -> np.ndarray:
    return np.round(np.clip(img, 0.0, 1.0) * 255.0) / 255.0


# ---- training ----

def train_engine(spec: EngineSpec, images, factors, seed: int = 0, provenance: dict | None = None) -> SREngine:
    """Train (or load) an engine for ``factors`` from in-memory HR ``images``."""
    if spec.kind in INTERPOLATION_KINDS:
        return interpolation_engine(spec.kind)
    if spec.model:
        return load_engine(spec.model)
    images = list(images)
    if not images:
        raise ValueError("empty training manifest")
    factors = sorted({int(f) for f in factors if int(f) > 1})
    if not factors:
        raise ValueError("trainable engines need a factor >= 2")
    prov = {"kind": spec.kind, "factors": factors, "train_corpus": spec.train_corpus,
            "engine_spec": spec.__dict__, "seed": seed, **(provenance or {})}
    cfg = spec.sgd(seed)
    patch = spec.patch or DEFAULT_PATCH.get(spec.kind, 33)
    if spec.kind == "srcnn":
        if len(factors) != 1:
            raise ValueError("srcnn engines are trained for a single factor")
        pairs = prepare_pairs(images, factors, patch, spec.stride, spec.budget, seed, augment=spec.augment)
        return train_srcnn(pairs, cfg, provenance=prov)
    if spec.kind == "vdcnn":
        pairs = prepare_pairs(images, factors, patch, spec.stride, spec.budget, seed, augment=spec.augment)
        return train_vdcnn(pairs, cfg, depth=spec.depth, width=spec.width, provenance=prov)
    if spec.kind == "srgan":
        pairs = prepare_pairs(images, [SRGAN_FACTOR], patch, spec.stride, spec.budget, seed, mode="srgan",
                              augment=spec.augment)
        return train_srgan(pairs, cfg, spec.adv_weight, n_res_blocks=spec.n_res_blocks,
                           width=spec.width, provenance=prov)
    if len(factors) != 1:
        raise ValueError("pca engines are trained for a single factor")
    return train_pca(images, factors[0], spec.pca_patch, spec.pca_overlap, provenance=prov)


def engine_groups(spec: EngineSpec, factors) -> list[tuple[int, ...]]:
    """How the factors of a sweep are split over separately trained engines."""
    f = sorted({int(x) for x in factors if int(x) > 1})
    if spec.kind in INTERPOLATION_KINDS or spec.model or spec.kind in ("vdcnn", "srgan"):
        return [tuple(f)] if f else []
    return [(x,) for x in f]


# ---- reconstruction ----

def reconstruct(engine: SREngine | None, hr: np.ndarray, factor: int, quantize: bool = True) -> np.ndarray:
    """Downscale ``hr`` by ``factor`` and super-resolve back to its size (factor 1: identity)."""
    if factor == 1 or engine is None:
        return np.asarray(hr, np.float64)
    lr = downscale(hr, factor)
    h, w = hr.shape
    out = super_resolve(engine, lr, factor, out_size=(w, h))
    return quantize8(out) if quantize else out


# ---- templates and verification ----

def segmentation_for(entry: ManifestEntry, img: np.ndarray, source: str) -> SegmentationResult:
    if source == "sidecar":
        return load_segmentation(sidecar_path(entry.path))
    return segment(img)


def iris_box(seg: SegmentationResult, shape) -> tuple[slice, slice]:
    c = seg.iris
    h, w = shape
    y0, y1 = max(0, int(np.floor(c.cy - c.r))), min(h, int(np.ceil(c.cy + c.r)) + 1)
    x0, x1 = max(0, int(np.floor(c.cx - c.r))), min(w, int(np.ceil(c.cx + c.r)) + 1)
    return slice(y0, y1), slice(x0, x1)


def make_template(img: np.ndarray, seg: SegmentationResult, matcher: str):
    if not seg.usable:
        raise ValueError("segmentation unusable")
    if matcher == "sift":
        return sift_extract(img[iris_box(seg, img.shape)])
    return ENCODERS[matcher](normalize(img, seg))


def comparator(matcher: str, max_shift: int = 8):
    if matcher == "sift":
        return sift_match
    return lambda a, b: hamming_distance(a, b, max_shift)


@dataclass
class Failure:
    stage: str
    image: str
    error: str
    engine: str = ""
    factor: int = 0

    def as_dict(self):
        return dict(self.__dict__)


def templates_for(entries, images, matcher: str, source: str, failures: list, tag: dict | None = None):
    """``(label, template)`` for every image whose segmentation and encoding succeed."""
    tag = tag or {}

    def one(args):
        entry, img = args
        try:
            seg = segmentation_for(entry, img, source)
            return (entry.label, make_template(img, seg, matcher)), None
        except Exception as exc:  # per-image failures never abort a sweep
            return None, Failure("template", entry.name, f"{type(exc).__name__}: {exc}", **tag)

    out = []
    for item, fail in parallel_map(one, list(zip(entries, images))):
        if fail is not None:
            failures.append(fail)
        else:
            out.append(item)
    return out


def verify(enroll_entries, enroll_images, probe_entries, probe_images, matcher: str,
           source: str = "sidecar", max_shift: int = 8, impostor_budget: int | None = None,
           seed: int = 0, failures: list | None = None, tag: dict | None = None) -> ScoreSet:
    """Score every probe against every enrolment template."""
    failures = failures if failures is not None else []
    policy = "all" if impostor_budget is None else ("sampled", impostor_budget, seed)
    probes = templates_for(probe_entries, probe_images, matcher, source, failures, tag)
    if [e.path for e in enroll_entries] == [e.path for e in probe_entries]:
        # self-verification: all unordered pairs within one set
        return pair_scores(probes, comparator(matcher, max_shift), policy, POLARITY[matcher])
    enrolled = templates_for(enroll_entries, enroll_images, matcher, source, failures, tag)
    return pair_scores(probes, comparator(matcher, max_shift), policy, POLARITY[matcher], against=enrolled)


# ---- experiment ----

@dataclass
class ExperimentResult:
    rows: list[ReportRow]
    failures: list[Failure] = field(default_factory=list)
    report_path: str = ""
    digest: str = ""

    @property
    def ok(self) -> bool:
        return not self.failures


def _row_stem(engine: str, factor: int, matcher: str) -> str:
    return f"{engine}_x{factor}_{matcher}"


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Train engines, then for every engine x factor: degrade probes, super-resolve,
    assess quality, encode and score against the enrolment set.

    Factor 1 denotes the original-resolution baseline and yields a single
    ``original`` row per matcher.
    """
    os.makedirs(cfg.out, exist_ok=True)
    digest = config_digest(cfg)
    enroll = load_manifest(cfg.enroll)
    probe = load_manifest(cfg.probe)
    if not enroll or not probe:
        raise ValueError("enrolment and probe manifests must be nonempty")
    enroll_imgs = [load_image(e.path) for e in enroll]
    probe_imgs = [load_image(e.path) for e in probe]
    train_entries = load_manifest(cfg.train) if cfg.train else []
    train_imgs = [load_image(e.path) for e in train_entries]
    prov = {"train_manifest_digest": manifest_digest(train_entries)} if train_entries else {}

    failures: list[Failure] = []
    rows: list[ReportRow] = []
    plans = []  # (engine name, train corpus, factor, engine or None)
    if 1 in cfg.factors:
        plans.append((ORIGINAL, "-", 1, None))
    for spec in cfg.engines:
        for group in engine_groups(spec, cfg.factors):
            try:
                engine = train_engine(spec, train_imgs, group, cfg.seed, prov)
            except Exception as exc:
                for f in group:
                    failures.append(Failure("train", cfg.train or "-", f"{type(exc).__name__}: {exc}",
                                            spec.name, f))
                continue
            for f in group:
                plans.append((spec.name, spec.train_corpus, f, engine))

    for name, corpus, factor, engine in plans:
        tag = {"engine": name, "factor": factor}

        def rec(args):
            entry, img = args
            try:
                return reconstruct(engine, img, factor, cfg.quantize), None
            except Exception as exc:
                return None, Failure("reconstruct", entry.name, f"{type(exc).__name__}: {exc}", **tag)

        results = parallel_map(lambda a: rec(a), list(zip(probe, probe_imgs)))
        ok_entries, ok_imgs, refs = [], [], []
        for entry, img, (out, fail) in zip(probe, probe_imgs, results):
            if fail is not None:
                failures.append(fail)
                continue
            ok_entries.append(entry)
            ok_imgs.append(out)
            refs.append(img)
        if not ok_imgs:
            continue
        q = quality_report(zip(refs, ok_imgs), roi=cfg.roi, with_fsim=cfg.with_fsim).mean
        for matcher in cfg.matchers:
            try:
                scores = verify(enroll, enroll_imgs, ok_entries, ok_imgs, matcher, cfg.segmentation,
                                cfg.max_shift, cfg.impostor_budget, cfg.seed, failures, tag)
                eer = compute_eer(scores)
            except Exception as exc:
                failures.append(Failure("verify", cfg.probe, f"{type(exc).__name__}: {exc}", **tag))
                continue
            rows.append(ReportRow(name, corpus, factor, matcher, eer, q.psnr, q.ssim, q.fsim,
                                  *scores.counts))
            if cfg.svg:
                stem = os.path.join(cfg.out, _row_stem(name, factor, matcher))
                title = f"{name} x{factor} {matcher}"
                write_text(stem + "_hist.svg", histogram_svg(histogram(scores), title, POLARITY[matcher]))
                write_text(stem + "_roc.svg", roc_svg(roc_curve(scores), title))

    report = os.path.join(cfg.out, "report.csv")
    write_report_csv(report, rows, digest)
    with open(os.path.join(cfg.out, "run_info.json"), "w") as fh:
        json.dump({"config_digest": digest, "config": cfg.to_dict(), "rows": len(rows),
                   "failures": [f.as_dict() for f in failures]}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return ExperimentResult(rows, failures, report, digest)


def save_scores(path, scores: ScoreSet, probe_labels, enroll_labels=None) -> None:
    write_scores_csv(path, scores, probe_labels, enroll_labels)
