from __future__ import annotations

import numpy as np

BCE_EPS = 1e-7


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error and its gradient ``2 (pred - target) / N``."""
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    diff = pred.astype(np.float64) - target.astype(np.float64)
    loss = float(np.mean(diff * diff))
    grad = (2.0 / diff.size) * diff
    return loss, grad.astype(pred.dtype if pred.dtype.kind == "f" else np.float64)


def _check_labels(label: np.ndarray) -> np.ndarray:
    label = np.asarray(label, dtype=np.float64)
    if not np.all((label == 0.0) | (label == 1.0)):
        raise ValueError("labels must be 0 or 1")
    return label


def bce_loss(prob: np.ndarray, label) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy on probabilities, clamped to [eps, 1 - eps].

    Returns the loss and the gradient with respect to ``prob``.
    """
    prob = np.asarray(prob)
    label = np.broadcast_to(_check_labels(label), prob.shape)
    p = np.clip(prob.astype(np.float64), BCE_EPS, 1.0 - BCE_EPS)
    loss = float(-np.mean(label * np.log(p) + (1.0 - label) * np.log(1.0 - p)))
    grad = (p - label) / (p * (1.0 - p)) / p.size
    return loss, grad.astype(prob.dtype if prob.dtype.kind == "f" else np.float64)


def bce_with_logits(logits: np.ndarray, label) -> tuple[float, np.ndarray]:
    """Stable combined sigmoid + BCE; gradient is ``(sigmoid(z) - y) / N``."""
    z = np.asarray(logits, dtype=np.float64)
    label = np.broadcast_to(_check_labels(label), z.shape)
    loss = float(np.mean(np.maximum(z, 0) - z * label + np.log1p(np.exp(-np.abs(z)))))
    grad = (1.0 / (1.0 + np.exp(-z)) - label) / z.size
    return loss, grad
