"""Layer kinds for the NCHW convolutional engine.

Every layer keeps its learnable arrays in ``params`` and the matching
gradients in ``grads`` (``None`` until a backward pass fills them).
Forward caches whatever the backward pass needs; calling ``backward``
without a preceding training-mode forward raises ``RuntimeError``.
"""

from __future__ import annotations

import numpy as np


class Layer:
    kind = "layer"

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray | None] = {}
        self.buffers: dict[str, np.ndarray] = {}
        self._cache = None

    # hyperparameters needed to rebuild the layer
    def config(self) -> dict:
        return {}

    def out_channels(self, in_channels: int) -> int:
        return in_channels

    def init(self, rng: np.random.Generator) -> None:
        pass

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        raise NotImplementedError

    def backward(self, g: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _cached(self):
        if self._cache is None:
            raise RuntimeError(f"{self.kind}: backward called without a training-mode forward")
        return self._cache

    def _set_grads(self, **grads):
        for name, value in grads.items():
            self.grads[name] = value.astype(self.params[name].dtype, copy=False)

    def astype(self, dtype) -> None:
        for store in (self.params, self.buffers):
            for name in store:
                store[name] = store[name].astype(dtype)
        for name in self.grads:
            self.grads[name] = None

    def __repr__(self):
        cfg = ", ".join(f"{k}={v}" for k, v in self.config().items())
        return f"{self.kind}({cfg})"


# cached patch matrices above this size are recomputed in backward instead
COLS_CACHE_BYTES = 32 * 2**20


def _im2col_nhwc(xp: np.ndarray, k: int, stride: int) -> tuple[np.ndarray, int, int]:
    """Patch matrix with columns ordered (ki, kj, channel) from an NHWC tensor."""
    n, h, w, c = xp.shape
    oh = (h - k) // stride + 1
    ow = (w - k) // stride + 1
    cols = np.empty((n, oh, ow, k * k * c), dtype=xp.dtype)
    for i in range(k):
        for j in range(k):
            t = i * k + j
            cols[..., t * c:(t + 1) * c] = xp[:, i:i + stride * (oh - 1) + 1:stride,
                                              j:j + stride * (ow - 1) + 1:stride, :]
    return cols.reshape(n * oh * ow, k * k * c), oh, ow


class Conv2D(Layer):
    kind = "conv"

    def __init__(self, in_channels: int, out_channels: int, kernel: int,
                 stride: int = 1, padding: int = 0, pad_mode: str = "zero"):
        super().__init__()
        if min(in_channels, out_channels, kernel, stride) < 1 or padding < 0:
            raise ValueError("conv requires k, d, n, stride >= 1 and padding >= 0")
        if pad_mode not in ("zero", "edge"):
            raise ValueError(f"unknown pad_mode {pad_mode!r}")
        self.in_ch, self.out_ch = in_channels, out_channels
        self.kernel, self.stride, self.padding = kernel, stride, padding
        self.pad_mode = pad_mode
        self.params = {
            "weight": np.zeros((out_channels, in_channels, kernel, kernel), np.float32),
            "bias": np.zeros(out_channels, np.float32),
        }
        self.grads = {"weight": None, "bias": None}

    def config(self):
        return {"in_channels": self.in_ch, "out_channels": self.out_ch, "kernel": self.kernel,
                "stride": self.stride, "padding": self.padding, "pad_mode": self.pad_mode}

    def out_channels(self, in_channels):
        if in_channels != self.in_ch:
            raise ValueError(f"conv expects {self.in_ch} input channels, got {in_channels}")
        return self.out_ch

    def output_size(self, size: int) -> int:
        return (size + 2 * self.padding - self.kernel) // self.stride + 1

    def init(self, rng):
        fan_in = self.in_ch * self.kernel * self.kernel
        bound = np.sqrt(6.0 / fan_in)
        w = self.params["weight"]
        self.params["weight"] = rng.uniform(-bound, bound, w.shape).astype(w.dtype)
        self.params["bias"] = np.zeros_like(self.params["bias"])

    def _wmat(self) -> np.ndarray:
        # (out, ki*kj*in) matching the column order of _im2col_nhwc
        return self.params["weight"].transpose(0, 2, 3, 1).reshape(self.out_ch, -1)

    def forward(self, x, train):
        n, c, h, w = x.shape
        if c != self.in_ch:
            raise ValueError(f"conv expects {self.in_ch} channels, got {c}")
        p = self.padding
        if h + 2 * p < self.kernel or w + 2 * p < self.kernel:
            raise ValueError(f"kernel {self.kernel} larger than padded input {h}x{w}")
        xp = np.ascontiguousarray(x.transpose(0, 2, 3, 1))
        if p:
            mode = "constant" if self.pad_mode == "zero" else "edge"
            xp = np.pad(xp, ((0, 0), (p, p), (p, p), (0, 0)), mode=mode)
        cols, oh, ow = _im2col_nhwc(xp, self.kernel, self.stride)
        y = cols @ self._wmat().T
        y += self.params["bias"]
        if train:
            keep = cols if cols.nbytes <= COLS_CACHE_BYTES else None
            self._cache = (xp, keep, oh, ow)
        else:
            self._cache = None
        return np.ascontiguousarray(y.reshape(n, oh, ow, self.out_ch).transpose(0, 3, 1, 2))

    def backward(self, g):
        xp, cols, oh, ow = self._cached()
        k, s, p = self.kernel, self.stride, self.padding
        if cols is None:
            cols, _, _ = _im2col_nhwc(xp, k, s)
        gf = np.ascontiguousarray(g.transpose(0, 2, 3, 1)).reshape(-1, self.out_ch)
        dw = (gf.T @ cols).reshape(self.out_ch, k, k, self.in_ch).transpose(0, 3, 1, 2)
        self._set_grads(weight=dw, bias=gf.sum(axis=0))
        wk = np.ascontiguousarray(self.params["weight"].transpose(2, 3, 0, 1))
        n = g.shape[0]
        dxp = np.zeros(xp.shape, dtype=g.dtype)
        for i in range(k):
            for j in range(k):
                dxp[:, i:i + s * (oh - 1) + 1:s, j:j + s * (ow - 1) + 1:s, :] += \
                    (gf @ wk[i, j]).reshape(n, oh, ow, self.in_ch)
        if p:
            if self.pad_mode == "edge":
                # fold gradients of replicated border samples back onto the edge
                dxp[:, p, :, :] += dxp[:, :p, :, :].sum(axis=1)
                dxp[:, -p - 1, :, :] += dxp[:, -p:, :, :].sum(axis=1)
                dxp[:, :, p, :] += dxp[:, :, :p, :].sum(axis=2)
                dxp[:, :, -p - 1, :] += dxp[:, :, -p:, :].sum(axis=2)
            dxp = dxp[:, p:-p, p:-p, :]
        return np.ascontiguousarray(dxp.transpose(0, 3, 1, 2))


class ReLU(Layer):
    kind = "relu"

    def forward(self, x, train):
        mask = x > 0
        self._cache = mask if train else None
        return x * mask

    def backward(self, g):
        return g * self._cached()


class LeakyReLU(Layer):
    kind = "leaky_relu"

    def __init__(self, slope: float = 0.2):
        super().__init__()
        self.slope = float(slope)

    def config(self):
        return {"slope": self.slope}

    def forward(self, x, train):
        self._cache = x if train else None
        return np.where(x > 0, x, x * x.dtype.type(self.slope))

    def backward(self, g):
        x = self._cached()
        return np.where(x > 0, g, g * g.dtype.type(self.slope))


class PReLU(Layer):
    """Per-channel learnable negative slope."""

    kind = "prelu"

    def __init__(self, channels: int, init_slope: float = 0.25):
        super().__init__()
        self.channels = channels
        self.init_slope = float(init_slope)
        self.params = {"alpha": np.full(channels, init_slope, np.float32)}
        self.grads = {"alpha": None}

    def config(self):
        return {"channels": self.channels, "init_slope": self.init_slope}

    def out_channels(self, in_channels):
        if in_channels != self.channels:
            raise ValueError(f"prelu expects {self.channels} channels, got {in_channels}")
        return in_channels

    def init(self, rng):
        self.params["alpha"] = np.full_like(self.params["alpha"], self.init_slope)

    def forward(self, x, train):
        a = self.params["alpha"].reshape(1, -1, 1, 1)
        self._cache = x if train else None
        return np.where(x > 0, x, a * x)

    def backward(self, g):
        x = self._cached()
        a = self.params["alpha"].reshape(1, -1, 1, 1)
        neg = x <= 0
        self._set_grads(alpha=(g * x * neg).sum(axis=(0, 2, 3)))
        return np.where(neg, a * g, g)


class Sigmoid(Layer):
    kind = "sigmoid"

    def forward(self, x, train):
        y = 1.0 / (1.0 + np.exp(-np.clip(x, -80, 80)))
        self._cache = y if train else None
        return y.astype(x.dtype, copy=False)

    def backward(self, g):
        y = self._cached()
        return g * y * (1.0 - y)


class BatchNorm2D(Layer):
    kind = "batch_norm"

    def __init__(self, channels: int, momentum: float = 0.9, eps: float = 1e-5):
        super().__init__()
        if eps <= 0:
            raise ValueError("batch_norm eps must be positive")
        self.channels, self.momentum, self.eps = channels, float(momentum), float(eps)
        self.params = {"gamma": np.ones(channels, np.float32), "beta": np.zeros(channels, np.float32)}
        self.grads = {"gamma": None, "beta": None}
        self.buffers = {"running_mean": np.zeros(channels, np.float32),
                        "running_var": np.ones(channels, np.float32)}

    def config(self):
        return {"channels": self.channels, "momentum": self.momentum, "eps": self.eps}

    def out_channels(self, in_channels):
        if in_channels != self.channels:
            raise ValueError(f"batch_norm expects {self.channels} channels, got {in_channels}")
        return in_channels

    def init(self, rng):
        self.params["gamma"] = np.ones_like(self.params["gamma"])
        self.params["beta"] = np.zeros_like(self.params["beta"])
        self.buffers["running_mean"] = np.zeros_like(self.buffers["running_mean"])
        self.buffers["running_var"] = np.ones_like(self.buffers["running_var"])

    def forward(self, x, train):
        gamma = self.params["gamma"].reshape(1, -1, 1, 1)
        beta = self.params["beta"].reshape(1, -1, 1, 1)
        if train:
            # statistics accumulated in float64
            mean = x.mean(axis=(0, 2, 3), dtype=np.float64)
            var = x.var(axis=(0, 2, 3), dtype=np.float64)
            m = self.momentum
            rm, rv = self.buffers["running_mean"], self.buffers["running_var"]
            self.buffers["running_mean"] = (m * rm + (1 - m) * mean).astype(rm.dtype)
            self.buffers["running_var"] = (m * rv + (1 - m) * var).astype(rv.dtype)
            inv_std = (1.0 / np.sqrt(var + self.eps)).astype(x.dtype)
            xhat = (x - mean.astype(x.dtype).reshape(1, -1, 1, 1)) * inv_std.reshape(1, -1, 1, 1)
            self._cache = (xhat, inv_std)
        else:
            mean = self.buffers["running_mean"].reshape(1, -1, 1, 1)
            inv_std = 1.0 / np.sqrt(self.buffers["running_var"].reshape(1, -1, 1, 1) + self.eps)
            xhat = ((x - mean) * inv_std).astype(x.dtype, copy=False)
            self._cache = None
        return gamma * xhat + beta

    def backward(self, g):
        xhat, inv_std = self._cached()
        m = g.shape[0] * g.shape[2] * g.shape[3]
        dbeta = g.sum(axis=(0, 2, 3))
        dgamma = (g * xhat).sum(axis=(0, 2, 3))
        self._set_grads(gamma=dgamma, beta=dbeta)
        gamma = self.params["gamma"]
        scale = (gamma * inv_std / m).reshape(1, -1, 1, 1)
        return scale * (m * g - dbeta.reshape(1, -1, 1, 1) - xhat * dgamma.reshape(1, -1, 1, 1))


class ResidualAdd(Layer):
    """Adds the activation recorded at index ``source`` to the running input.

    Activation index 0 is the network input; index ``i + 1`` is the output of
    layer ``i``. The network, not the layer, routes the skip gradient.
    """

    kind = "residual_add"

    def __init__(self, source: int):
        super().__init__()
        self.source = int(source)

    def config(self):
        return {"source": self.source}

    def forward(self, x, train, skip=None):
        if skip is None:
            raise RuntimeError("residual_add must be evaluated inside a Network")
        if skip.shape != x.shape:
            raise ValueError(f"skip shape {skip.shape} differs from {x.shape}")
        self._cache = True if train else None
        return x + skip

    def backward(self, g):
        self._cached()
        return g


def pixel_shuffle(x: np.ndarray, r: int) -> np.ndarray:
    """(n, c*r*r, h, w) -> (n, c, h*r, w*r)."""
    n, c, h, w = x.shape
    if c % (r * r):
        raise ValueError(f"pixel_shuffle needs channels divisible by {r * r}, got {c}")
    oc = c // (r * r)
    return x.reshape(n, oc, r, r, h, w).transpose(0, 1, 4, 2, 5, 3).reshape(n, oc, h * r, w * r)


def pixel_unshuffle(x: np.ndarray, r: int) -> np.ndarray:
    """Exact inverse of :func:`pixel_shuffle`."""
    n, c, h, w = x.shape
    if h % r or w % r:
        raise ValueError(f"spatial size {h}x{w} not divisible by {r}")
    return x.reshape(n, c, h // r, r, w // r, r).transpose(0, 1, 3, 5, 2, 4).reshape(
        n, c * r * r, h // r, w // r)


class PixelShuffle(Layer):
    kind = "pixel_shuffle"

    def __init__(self, factor: int):
        super().__init__()
        if factor < 1:
            raise ValueError("pixel_shuffle factor must be >= 1")
        self.factor = int(factor)

    def config(self):
        return {"factor": self.factor}

    def out_channels(self, in_channels):
        r2 = self.factor**2
        if in_channels % r2:
            raise ValueError(f"pixel_shuffle input channels {in_channels} not divisible by {r2}")
        return in_channels // r2

    def forward(self, x, train):
        self._cache = True if train else None
        return np.ascontiguousarray(pixel_shuffle(x, self.factor))

    def backward(self, g):
        self._cached()
        return np.ascontiguousarray(pixel_unshuffle(g, self.factor))


class Dense(Layer):
    """Fully connected layer on the flattened (c, h, w) volume; output (n, out, 1, 1)."""

    kind = "dense"

    def __init__(self, in_features: int, out_features: int):
        super().__init__()
        self.in_features, self.out_features = in_features, out_features
        self.params = {"weight": np.zeros((out_features, in_features), np.float32),
                       "bias": np.zeros(out_features, np.float32)}
        self.grads = {"weight": None, "bias": None}

    def config(self):
        return {"in_features": self.in_features, "out_features": self.out_features}

    def out_channels(self, in_channels):
        return self.out_features

    def init(self, rng):
        bound = np.sqrt(6.0 / self.in_features)
        w = self.params["weight"]
        self.params["weight"] = rng.uniform(-bound, bound, w.shape).astype(w.dtype)
        self.params["bias"] = np.zeros_like(self.params["bias"])

    def forward(self, x, train):
        flat = x.reshape(x.shape[0], -1)
        if flat.shape[1] != self.in_features:
            raise ValueError(f"dense expects {self.in_features} features, got {flat.shape[1]}")
        self._cache = (x.shape, flat) if train else None
        y = flat @ self.params["weight"].T + self.params["bias"]
        return y.reshape(x.shape[0], self.out_features, 1, 1)

    def backward(self, g):
        shape, flat = self._cached()
        gf = g.reshape(g.shape[0], -1)
        self._set_grads(weight=gf.T @ flat, bias=gf.sum(axis=0))
        return (gf @ self.params["weight"]).reshape(shape)


LAYER_KINDS = {cls.kind: cls for cls in
               (Conv2D, ReLU, LeakyReLU, PReLU, Sigmoid, BatchNorm2D, ResidualAdd, PixelShuffle, Dense)}
