"""Training procedures for SRCNN, VDCNN and the SRGAN pair."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import replace

import numpy as np

from ..nn import Network, NonFiniteError, SGDConfig, bce_loss, mse_loss, sgd_step
from .engine import SRGAN_FACTOR, SREngine
from .models import SRCNN_MARGIN, build_discriminator, build_generator, build_srcnn, build_vdcnn
from .pairs import PairSet
from .pca import pca_train

log = logging.getLogger(__name__)

SRCNN_DEFAULTS = SGDConfig(learning_rate=1e-3, momentum=0.9, batch_size=16, epochs=10)
VDCNN_DEFAULTS = SGDConfig(learning_rate=1e-3, momentum=0.9, grad_clip=1.0, batch_size=16, epochs=10)
SRGAN_DEFAULTS = SGDConfig(learning_rate=1e-3, momentum=0.9, grad_clip=1.0, batch_size=8, epochs=10)
ADV_WEIGHT = 1e-3


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for s in range(0, n, batch_size):
        yield order[s:s + batch_size]


def _check_loss(value: float, epoch: int) -> None:
    if not math.isfinite(value):
        raise NonFiniteError(f"loss became non-finite in epoch {epoch}")


def fit_regression(net: Network, inputs: np.ndarray, targets: np.ndarray, cfg: SGDConfig,
                   crop: int = 0, time_budget: float | None = None) -> list[float]:
    """Minibatch momentum SGD on MSE; returns the mean loss of every epoch.

    ``inputs`` and ``targets`` are (N, h, w). With ``crop`` the target is
    centre-cropped by that many pixels per side to match a valid-mode output.
    Training stops early (after a whole batch) once ``time_budget`` seconds
    have elapsed.
    """
    if len(inputs) == 0:
        raise ValueError("no training pairs")
    x_all = np.asarray(inputs, np.float32)[:, None]
    t_all = np.asarray(targets, np.float32)[:, None]
    if crop:
        t_all = t_all[..., crop:-crop, crop:-crop]
    rng = np.random.default_rng(cfg.seed)
    history = []
    start = time.perf_counter()
    for epoch in range(cfg.epochs):
        step_cfg = cfg.at_epoch(epoch)
        total, count = 0.0, 0
        for idx in _batches(len(x_all), cfg.batch_size, rng):
            pred = net.forward(x_all[idx], train=True)
            loss, grad = mse_loss(pred, t_all[idx])
            _check_loss(loss, epoch)
            net.backward(grad)
            sgd_step(net, step_cfg)
            total += loss * len(idx)
            count += len(idx)
            if time_budget is not None and time.perf_counter() - start > time_budget:
                break
        history.append(total / count)
        log.debug("epoch %d loss %.6g", epoch, history[-1])
        if time_budget is not None and time.perf_counter() - start > time_budget:
            log.info("time budget reached after %d epochs", epoch + 1)
            break
    return history


def _single_factor(pairs: PairSet) -> int:
    factors = np.unique(pairs.factors)
    if len(factors) != 1:
        raise ValueError(f"expected single-factor pairs, got factors {factors.tolist()}")
    return int(factors[0])


def train_srcnn(pairs: PairSet, cfg: SGDConfig | None = None, net: Network | None = None,
                provenance: dict | None = None, time_budget: float | None = None) -> SREngine:
    cfg = cfg or SRCNN_DEFAULTS
    if len(pairs) == 0:
        raise ValueError("no training pairs")
    factor = _single_factor(pairs)
    if pairs.lr.shape != pairs.hr.shape:
        raise ValueError("srcnn pairs must be at HR raster size")
    if min(pairs.lr.shape[1:]) <= 2 * SRCNN_MARGIN:
        raise ValueError("srcnn patches must be larger than 12 px")
    net = net or build_srcnn(cfg.seed)
    history = fit_regression(net, pairs.lr, pairs.hr, cfg, crop=SRCNN_MARGIN, time_budget=time_budget)
    meta = {"config": cfg.to_dict(), "n_pairs": len(pairs), **(provenance or {})}
    return SREngine("srcnn", (factor,), {"srcnn": net}, meta=meta, history=history)


def train_vdcnn(pairs: PairSet, cfg: SGDConfig | None = None, net: Network | None = None,
                depth: int = 20, width: int = 64, provenance: dict | None = None,
                time_budget: float | None = None) -> SREngine:
    """Residual training: the network learns ``hr - lr`` over all factors present."""
    cfg = cfg or VDCNN_DEFAULTS
    if len(pairs) == 0:
        raise ValueError("no training pairs")
    if pairs.lr.shape != pairs.hr.shape:
        raise ValueError("vdcnn pairs must be at HR raster size")
    net = net or build_vdcnn(depth, width, cfg.seed)
    residual = pairs.hr.astype(np.float32) - pairs.lr.astype(np.float32)
    history = fit_regression(net, pairs.lr, residual, cfg, time_budget=time_budget)
    factors = tuple(int(f) for f in np.unique(pairs.factors))
    meta = {"config": cfg.to_dict(), "n_pairs": len(pairs), "depth": depth, "width": width,
            **(provenance or {})}
    return SREngine("vdcnn", factors, {"vdcnn": net}, meta=meta, history=history)


def _d_step(D: Network, real: np.ndarray, fake: np.ndarray, cfg: SGDConfig) -> tuple[float, float]:
    batch = np.concatenate([real, fake])
    labels = np.concatenate([np.ones(len(real)), np.zeros(len(fake))]).reshape(-1, 1, 1, 1)
    prob = D.forward(batch, train=True)
    loss, grad = bce_loss(prob, labels)
    D.backward(grad)
    sgd_step(D, cfg)
    acc = float(np.mean((prob.ravel() > 0.5) == (labels.ravel() > 0.5)))
    return loss, acc


def discriminator_accuracy(G: Network, D: Network, lr: np.ndarray, hr: np.ndarray) -> float:
    """Fraction of real (``hr``) and generated (``G(lr)``) patches classified correctly."""
    fake = G.forward(np.asarray(lr, np.float32)[:, None])
    p_real = D.forward(np.asarray(hr, np.float32)[:, None]).ravel()
    p_fake = D.forward(fake).ravel()
    return float((np.sum(p_real > 0.5) + np.sum(p_fake <= 0.5)) / (len(p_real) + len(p_fake)))


def warmup_discriminator(G: Network, D: Network, pairs: PairSet, cfg: SGDConfig,
                         steps: int | None = None) -> list[float]:
    """Train ``D`` alone against a frozen generator; returns the per-step loss."""
    rng = np.random.default_rng(cfg.seed)
    x = pairs.lr.astype(np.float32)[:, None]
    y = pairs.hr.astype(np.float32)[:, None]
    losses = []
    n_steps = steps if steps is not None else cfg.epochs * math.ceil(len(pairs) / cfg.batch_size)
    while len(losses) < n_steps:
        for idx in _batches(len(pairs), cfg.batch_size, rng):
            fake = G.forward(x[idx])
            loss, _ = _d_step(D, y[idx], fake, cfg)
            _check_loss(loss, len(losses))
            losses.append(loss)
            if len(losses) >= n_steps:
                break
    return losses


def train_srgan(pairs: PairSet, cfg: SGDConfig | None = None, adv_weight: float = ADV_WEIGHT,
                generator: Network | None = None, discriminator: Network | None = None,
                n_res_blocks: int = 16, width: int = 64, disc_channels: int = 64,
                dense_width: int = 1024, d_cfg: SGDConfig | None = None,
                provenance: dict | None = None, time_budget: float | None = None) -> SREngine:
    """Alternating updates: D on real-vs-generated BCE, then G on MSE + adversarial BCE.

    With ``adv_weight == 0`` the generator updates are exactly those of
    pure-MSE training; the discriminator still trains but never feeds back.
    """
    cfg = cfg or SRGAN_DEFAULTS
    d_cfg = d_cfg or replace(cfg, seed=cfg.seed + 1)
    if adv_weight < 0:
        raise ValueError("adv_weight must be >= 0")
    if len(pairs) == 0:
        raise ValueError("no training pairs")
    factor = _single_factor(pairs)
    n, h, w = pairs.hr.shape
    if pairs.lr.shape[1:] != (h // factor, w // factor) or h != w:
        raise ValueError("srgan pairs need square HR patches and factor-times smaller LR patches")
    G = generator or build_generator(n_res_blocks, factor, width, cfg.seed)
    D = discriminator or build_discriminator(h, disc_channels, dense_width, cfg.seed + 1)
    x_all = pairs.lr.astype(np.float32)[:, None]
    y_all = pairs.hr.astype(np.float32)[:, None]
    rng = np.random.default_rng(cfg.seed)
    history, d_history = [], []
    start = time.perf_counter()
    for epoch in range(cfg.epochs):
        g_cfg, e_cfg = cfg.at_epoch(epoch), d_cfg.at_epoch(epoch)
        g_tot = d_tot = 0.0
        steps = 0
        for idx in _batches(n, cfg.batch_size, rng):
            fake = G.forward(x_all[idx], train=True)
            real = y_all[idx]
            d_loss, _ = _d_step(D, real, fake, e_cfg)

            mse, grad = mse_loss(fake, real)
            g_loss = mse
            if adv_weight:
                prob = D.forward(fake, train=True)
                adv, g_prob = bce_loss(prob, np.ones(prob.shape))
                grad = grad + adv_weight * D.backward(g_prob)
                D.zero_grad()
                g_loss += adv_weight * adv
            _check_loss(g_loss, epoch)
            _check_loss(d_loss, epoch)
            G.backward(grad)
            sgd_step(G, g_cfg)
            g_tot += g_loss
            d_tot += d_loss
            steps += 1
            if time_budget is not None and time.perf_counter() - start > time_budget:
                break
        history.append(g_tot / steps)
        d_history.append(d_tot / steps)
        if time_budget is not None and time.perf_counter() - start > time_budget:
            break
    meta = {"config": cfg.to_dict(), "adv_weight": adv_weight, "n_pairs": n,
            "d_loss": d_history, **(provenance or {})}
    if factor != SRGAN_FACTOR:
        log.warning("srgan trained at factor %d instead of %d", factor, SRGAN_FACTOR)
    return SREngine("srgan", (factor,), {"generator": G, "discriminator": D}, meta=meta, history=history)


def train_pca(images, factor: int, patch_size: int = 8, overlap: int = 4,
              provenance: dict | None = None) -> SREngine:
    model = pca_train(images, factor, patch_size, overlap)
    meta = {"patch_size": patch_size, "overlap": overlap, "n_images": model.n_train, **(provenance or {})}
    return SREngine("pca_eigenpatch", (factor,), pca=model, meta=meta)
