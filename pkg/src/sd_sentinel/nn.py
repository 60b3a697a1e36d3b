"""Minimal CNN building blocks on plain numpy arrays.

Implements exactly what the detector needs: 3x3 'same' 2-D convolution, 3-tap
'same' 1-D convolution, max pooling with floor semantics, ReLU, sigmoid, a
dense layer, binary cross-entropy, and Adam. Every layer caches what its
backward pass needs and returns the gradient with respect to its input, so a
network is just an ordered list of layers.

Convolutions are cross-correlations (no kernel flip), evaluated by unrolling
input patches into a matrix and multiplying (im2col), which keeps training on
hundreds of thousands of windows tractable without any ML framework.
Arrays are batch-first: (B, C, H, W) for 2-D, (B, C, L) for 1-D.
"""

from __future__ import annotations

import numpy as np


def he_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, dtype) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Logistic function, overflow-safe for arbitrarily large |x|."""
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class Layer:
    """Base: parameterized layers fill ``params``/``grads`` index-aligned."""

    def __init__(self) -> None:
        self.params: list[np.ndarray] = []
        self.grads: list[np.ndarray] = []

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dout: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def zero_grads(self) -> None:
        for g in self.grads:
            g[...] = 0.0


def _im2col2d(x: np.ndarray, k: int, pad: int) -> np.ndarray:
    b, c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    view = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(2, 3))
    # (B, C, H, W, k, k) -> (B*H*W, C*k*k)
    return np.ascontiguousarray(view.transpose(0, 2, 3, 1, 4, 5)).reshape(b * h * w, c * k * k)


def _conv2d_raw(x: np.ndarray, weight: np.ndarray, bias: np.ndarray | None, pad: int):
    b, _, h, w = x.shape
    c_out, c_in, k, _ = weight.shape
    cols = _im2col2d(x, k, pad)
    out = cols @ weight.reshape(c_out, c_in * k * k).T
    if bias is not None:
        out += bias
    return out.reshape(b, h, w, c_out).transpose(0, 3, 1, 2), cols


class Conv2d(Layer):
    """3x3 'same' convolution: (B, C_in, H, W) -> (B, C_out, H, W)."""

    def __init__(self, c_in: int, c_out: int, rng: np.random.Generator,
                 kernel: int = 3, dtype=np.float32) -> None:
        super().__init__()
        self.c_in, self.c_out, self.kernel = c_in, c_out, kernel
        self.pad = (kernel - 1) // 2
        w = he_uniform(rng, (c_out, c_in, kernel, kernel), c_in * kernel * kernel, dtype)
        b = np.zeros(c_out, dtype=dtype)
        self.params = [w, b]
        self.grads = [np.zeros_like(w), np.zeros_like(b)]
        self._cols: np.ndarray | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        out, self._cols = _conv2d_raw(x, self.params[0], self.params[1], self.pad)
        return out

    def backward(self, dout: np.ndarray) -> np.ndarray:
        w = self.params[0]
        dflat = np.ascontiguousarray(dout.transpose(0, 2, 3, 1)).reshape(-1, self.c_out)
        self.grads[0] += (dflat.T @ self._cols).reshape(w.shape)
        self.grads[1] += dflat.sum(axis=0)
        # input gradient: correlate dout with flipped kernels, channels swapped
        w_back = np.ascontiguousarray(w.transpose(1, 0, 2, 3)[:, :, ::-1, ::-1])
        dx, _ = _conv2d_raw(dout, w_back, None, self.pad)
        return dx


def _im2col1d(x: np.ndarray, k: int, pad: int) -> np.ndarray:
    b, c, length = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
    view = np.lib.stride_tricks.sliding_window_view(xp, k, axis=2)
    return np.ascontiguousarray(view.transpose(0, 2, 1, 3)).reshape(b * length, c * k)


def _conv1d_raw(x: np.ndarray, weight: np.ndarray, bias: np.ndarray | None, pad: int):
    b, _, length = x.shape
    c_out, c_in, k = weight.shape
    cols = _im2col1d(x, k, pad)
    out = cols @ weight.reshape(c_out, c_in * k).T
    if bias is not None:
        out += bias
    return out.reshape(b, length, c_out).transpose(0, 2, 1), cols


class Conv1d(Layer):
    """k-tap 'same' convolution: (B, C_in, L) -> (B, C_out, L)."""

    def __init__(self, c_in: int, c_out: int, rng: np.random.Generator,
                 kernel: int = 3, dtype=np.float32) -> None:
        super().__init__()
        self.c_in, self.c_out, self.kernel = c_in, c_out, kernel
        self.pad = (kernel - 1) // 2
        w = he_uniform(rng, (c_out, c_in, kernel), c_in * kernel, dtype)
        b = np.zeros(c_out, dtype=dtype)
        self.params = [w, b]
        self.grads = [np.zeros_like(w), np.zeros_like(b)]
        self._cols: np.ndarray | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        out, self._cols = _conv1d_raw(x, self.params[0], self.params[1], self.pad)
        return out

    def backward(self, dout: np.ndarray) -> np.ndarray:
        w = self.params[0]
        dflat = np.ascontiguousarray(dout.transpose(0, 2, 1)).reshape(-1, self.c_out)
        self.grads[0] += (dflat.T @ self._cols).reshape(w.shape)
        self.grads[1] += dflat.sum(axis=0)
        w_back = np.ascontiguousarray(w.transpose(1, 0, 2)[:, :, ::-1])
        dx, _ = _conv1d_raw(dout, w_back, None, self.pad)
        return dx


class MaxPool2d(Layer):
    """2x2 max pooling, stride = window; odd trailing rows/cols are dropped."""

    def __init__(self, size: int = 2) -> None:
        super().__init__()
        self.size = size
        self._idx: np.ndarray | None = None
        self._in_shape: tuple[int, ...] | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        s = self.size
        b, c, h, w = x.shape
        h2, w2 = h // s, w // s
        self._in_shape = x.shape
        tiles = (
            x[:, :, : h2 * s, : w2 * s]
            .reshape(b, c, h2, s, w2, s)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(b, c, h2, w2, s * s)
        )
        self._idx = tiles.argmax(axis=-1)
        return np.take_along_axis(tiles, self._idx[..., None], axis=-1)[..., 0]

    def backward(self, dout: np.ndarray) -> np.ndarray:
        s = self.size
        b, c, h, w = self._in_shape
        h2, w2 = h // s, w // s
        dtiles = np.zeros((b, c, h2, w2, s * s), dtype=dout.dtype)
        np.put_along_axis(dtiles, self._idx[..., None], dout[..., None], axis=-1)
        dx = np.zeros(self._in_shape, dtype=dout.dtype)
        dx[:, :, : h2 * s, : w2 * s] = (
            dtiles.reshape(b, c, h2, w2, s, s)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(b, c, h2 * s, w2 * s)
        )
        return dx


class MaxPool1d(Layer):
    """Window-w max pooling along the last axis, floor semantics."""

    def __init__(self, size: int = 2) -> None:
        super().__init__()
        self.size = size
        self._idx: np.ndarray | None = None
        self._in_shape: tuple[int, ...] | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        s = self.size
        b, c, length = x.shape
        l2 = length // s
        self._in_shape = x.shape
        tiles = x[:, :, : l2 * s].reshape(b, c, l2, s)
        self._idx = tiles.argmax(axis=-1)
        return np.take_along_axis(tiles, self._idx[..., None], axis=-1)[..., 0]

    def backward(self, dout: np.ndarray) -> np.ndarray:
        s = self.size
        b, c, length = self._in_shape
        l2 = length // s
        dtiles = np.zeros((b, c, l2, s), dtype=dout.dtype)
        np.put_along_axis(dtiles, self._idx[..., None], dout[..., None], axis=-1)
        dx = np.zeros(self._in_shape, dtype=dout.dtype)
        dx[:, :, : l2 * s] = dtiles.reshape(b, c, l2 * s)
        return dx


class ReLU(Layer):
    def __init__(self) -> None:
        super().__init__()
        self._mask: np.ndarray | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._mask = x > 0
        return np.maximum(x, 0)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        return dout * self._mask


class Sigmoid(Layer):
    def __init__(self) -> None:
        super().__init__()
        self._out: np.ndarray | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._out = sigmoid(x)
        return self._out

    def backward(self, dout: np.ndarray) -> np.ndarray:
        return dout * self._out * (1.0 - self._out)


class Flatten(Layer):
    def __init__(self) -> None:
        super().__init__()
        self._in_shape: tuple[int, ...] | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._in_shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        return dout.reshape(self._in_shape)


class Dense(Layer):
    """Affine map: (B, n_in) -> (B, n_out)."""

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, dtype=np.float32) -> None:
        super().__init__()
        self.n_in, self.n_out = n_in, n_out
        w = he_uniform(rng, (n_out, n_in), n_in, dtype)
        b = np.zeros(n_out, dtype=dtype)
        self.params = [w, b]
        self.grads = [np.zeros_like(w), np.zeros_like(b)]
        self._x: np.ndarray | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = x
        return x @ self.params[0].T + self.params[1]

    def backward(self, dout: np.ndarray) -> np.ndarray:
        self.grads[0] += dout.T @ self._x
        self.grads[1] += dout.sum(axis=0)
        return dout @ self.params[0]


def bce_loss(pred: np.ndarray, target: np.ndarray, clamp: float = 1e-7):
    """Mean binary cross-entropy and its gradient w.r.t. the predictions.

    Predictions are clamped to [clamp, 1 - clamp] before the logs; clamped
    entries get zero gradient (the loss is locally constant there).
    """
    pred = np.asarray(pred)
    target = np.asarray(target, dtype=pred.dtype)
    p = np.clip(pred, clamp, 1.0 - clamp)
    loss = float(np.mean(-(target * np.log(p) + (1.0 - target) * np.log1p(-p))))
    grad = (p - target) / (p * (1.0 - p)) / pred.size
    grad = np.where((pred >= clamp) & (pred <= 1.0 - clamp), grad, 0.0).astype(pred.dtype)
    return loss, grad


class Adam:
    """Adam with bias correction; state arrays match the parameter order."""

    def __init__(self, params: list[np.ndarray], lr: float = 0.001,
                 beta1: float = 0.5, beta2: float = 0.5, eps: float = 1e-8) -> None:
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1**self.t
        bc2 = 1.0 - b2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * np.square(g)
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
