"""Experiment configuration (TOML) and its digest."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field

import tomli

from ..nn import SGDConfig
from ..sr.engine import ENGINE_KINDS

MATCHERS = ("gabor", "qsw", "sift")
SEGMENTATION_SOURCES = ("sidecar", "auto")


class ConfigError(ValueError):
    pass


@dataclass
class EngineSpec:
    kind: str
    train_corpus: str = "-"
    model: str | None = None  # pre-trained model file; skips training
    learning_rate: float = 1e-3
    momentum: float = 0.9
    weight_decay: float = 0.0
    grad_clip: float | None = None
    lr_decay: float = 1.0
    batch_size: int = 16
    epochs: int = 10
    patch: int | None = None  # defaults per kind
    stride: int = 14
    budget: int | None = None
    augment: bool = False  # add the 8 rot90/flip variants of every patch
    depth: int = 20
    width: int = 64
    n_res_blocks: int = 16
    adv_weight: float = 1e-3
    pca_patch: int = 8
    pca_overlap: int = 4

    def __post_init__(self):
        if self.kind not in ENGINE_KINDS:
            raise ConfigError(f"unknown engine kind {self.kind!r}")

    def sgd(self, seed: int) -> SGDConfig:
        return SGDConfig(self.learning_rate, self.momentum, self.weight_decay, self.grad_clip,
                         self.batch_size, self.epochs, seed, self.lr_decay)

    @property
    def name(self) -> str:
        return self.kind


@dataclass
class ExperimentConfig:
    engines: list[EngineSpec]
    factors: list[int]
    matchers: list[str] = field(default_factory=lambda: ["gabor"])
    enroll: str = ""
    probe: str = ""
    train: str | None = None
    out: str = "experiment_out"
    seed: int = 0
    segmentation: str = "sidecar"
    max_shift: int = 8
    with_fsim: bool = True
    quantize: bool = True  # round reconstructions to 8-bit, as if written to PNG
    roi: list[int] | None = None  # x, y, w, h for an extra iris-region quality score
    impostor_budget: int | None = None
    svg: bool = True

    def __post_init__(self):
        if not self.engines:
            raise ConfigError("at least one engine is required")
        if not self.factors:
            raise ConfigError("at least one factor is required")
        if not self.matchers:
            raise ConfigError("at least one matcher is required")
        bad = [m for m in self.matchers if m not in MATCHERS]
        if bad:
            raise ConfigError(f"unknown matcher(s) {bad}; choose from {MATCHERS}")
        if any(int(f) < 1 for f in self.factors):
            raise ConfigError("factors must be >= 1")
        if self.segmentation not in SEGMENTATION_SOURCES:
            raise ConfigError(f"segmentation must be one of {SEGMENTATION_SOURCES}")
        self.engines = [e if isinstance(e, EngineSpec) else EngineSpec(**e) for e in self.engines]
        self.factors = [int(f) for f in self.factors]

    def to_dict(self) -> dict:
        return asdict(self)


def config_digest(cfg: ExperimentConfig) -> str:
    """Digest of the configuration, independent of where output is written."""
    d = cfg.to_dict()
    d.pop("out", None)
    blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _resolve(base: str, p):
    if p is None or p == "" or os.path.isabs(p):
        return p
    return os.path.normpath(os.path.join(base, p))


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    path = os.fspath(path)
    with open(path, "rb") as fh:
        try:
            raw = tomli.load(fh)
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    base = os.path.dirname(os.path.abspath(path))
    manifests = raw.pop("manifests", {})
    for role in ("enroll", "probe", "train"):
        if role in manifests:
            raw[role] = manifests[role]
    for key in ("enroll", "probe", "train", "out"):
        if key in raw:
            raw[key] = _resolve(base, raw[key])
    engines = []
    for e in raw.pop("engines", []):
        e = dict(e)
        if "model" in e:
            e["model"] = _resolve(base, e["model"])
        engines.append(EngineSpec(**e))
    try:
        return ExperimentConfig(engines=engines, **raw)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
