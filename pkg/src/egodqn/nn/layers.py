"""Batched layers with cached forward passes and exact backward passes.

Every layer takes a batch whose first axis is the sample axis; image
batches are channels-last ``(N, H, W, C)``. ``forward``
stores what ``backward`` needs; ``backward`` fills ``grads`` (same keys as
``params``) and returns the gradient with respect to the input.
"""
from __future__ import annotations

import numpy as np

from egodqn.nn import kernels


class Layer:
    kind = "layer"

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        # input layers of a network skip the input gradient during training
        self.need_input_grad = True

    def init_params(self, rng: np.random.Generator) -> None:
        pass

    def output_shape(self, input_shape: tuple) -> tuple:
        return input_shape

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params.values())

    def zero_grad(self) -> None:
        for g in self.grads.values():
            g.fill(0.0)

    def __repr__(self):
        return f"{type(self).__name__}()"


INIT_LIMITS = {
    "fan_in": lambda n: 1.0 / np.sqrt(n),
    "he": lambda n: np.sqrt(6.0 / n),
    "lecun": lambda n: np.sqrt(3.0 / n),
}


def he_uniform(rng, shape, fan_in):
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


def init_weights(rng, shape, fan_in, init="fan_in"):
    """Uniform weights on ``(-limit, limit)`` with the limit set by ``init``.

    ``fan_in`` uses ``1/sqrt(fan_in)``, ``he`` uses ``sqrt(6/fan_in)`` and
    ``lecun`` uses ``sqrt(3/fan_in)``; ``zeros`` returns an all-zero array.
    """
    if init == "zeros":
        return np.zeros(shape)
    if init not in INIT_LIMITS:
        raise ValueError(f"unknown init {init!r}")
    limit = INIT_LIMITS[init](fan_in)
    return rng.uniform(-limit, limit, size=shape)


class Conv2D(Layer):
    """Stride-1 cross-correlation with ``valid`` or ``same`` zero padding.

    Operates on channels-last batches ``(N, H, W, C)``; weights are stored
    as ``(out_channels, in_channels, k, k)``.
    """

    kind = "conv2d"

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int, padding: str = "valid",
                 init: str = "fan_in"):
        super().__init__()
        if init != "zeros" and init not in INIT_LIMITS:
            raise ValueError(f"unknown init {init!r}")
        if padding not in ("valid", "same"):
            raise ValueError(f"unknown padding {padding!r}")
        if padding == "same" and kernel_size % 2 == 0:
            raise ValueError("same padding needs an odd kernel size")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.padding = padding
        self.init = init
        self.pad = kernel_size // 2 if padding == "same" else 0
        shape = (out_channels, in_channels, kernel_size, kernel_size)
        self.params = {"W": np.zeros(shape), "b": np.zeros(out_channels)}
        self.grads = {"W": np.zeros(shape), "b": np.zeros(out_channels)}
        self._cache = None

    def init_params(self, rng):
        fan_in = self.in_channels * self.kernel_size ** 2
        self.params["W"][...] = init_weights(rng, self.params["W"].shape, fan_in, self.init)
        self.params["b"].fill(0.0)

    def output_shape(self, input_shape):
        h, w, c = input_shape
        if c != self.in_channels:
            raise ValueError(f"conv expects {self.in_channels} channels, got {c}")
        k, p = self.kernel_size, self.pad
        ho, wo = h + 2 * p - k + 1, w + 2 * p - k + 1
        if ho < 1 or wo < 1:
            raise ValueError(f"input {h}x{w} too small for a {k}x{k} {self.padding} convolution")
        return (ho, wo, self.out_channels)

    def _weight_matrix(self):
        # (F, C, k, k) -> (k*k*C, F), matching the (di, dj, c) im2col order
        return self.params["W"].transpose(2, 3, 1, 0).reshape(-1, self.out_channels)

    def forward(self, x):
        n = x.shape[0]
        ho, wo, f = self.output_shape(x.shape[1:])
        cols = kernels.im2col(x, self.kernel_size, self.pad)
        w = self._weight_matrix()
        out = cols @ w
        out += self.params["b"]
        self._cache = (cols, w, x.shape)
        return out.reshape(n, ho, wo, f)

    def backward(self, grad_out):
        cols, w, in_shape = self._cache
        k, f = self.kernel_size, self.out_channels
        g = grad_out.reshape(-1, f)
        dw = (cols.T @ g).reshape(k, k, self.in_channels, f)
        self.grads["W"] += dw.transpose(3, 2, 0, 1)
        self.grads["b"] += g.sum(axis=0)
        if not self.need_input_grad:
            return None
        return kernels.col2im(g @ w.T, in_shape, k, self.pad)

    def __repr__(self):
        return f"Conv2D({self.in_channels}->{self.out_channels}, k={self.kernel_size}, {self.padding})"


def conv2d_forward(x, weights, bias, padding="valid"):
    """Single-sample convolution on ``(C, H, W)`` input; returns ``(F, H', W')``."""
    f, c, k, _ = weights.shape
    if x.ndim != 3 or x.shape[0] != c:
        raise ValueError(f"input {x.shape} does not match weights {weights.shape}")
    layer = Conv2D(c, f, k, padding)
    layer.params = {"W": np.asarray(weights, dtype=float), "b": np.asarray(bias, dtype=float)}
    out = layer.forward(np.ascontiguousarray(x.transpose(1, 2, 0))[None])
    return out[0].transpose(2, 0, 1)


def conv2d_backward(grad_out, x, weights, padding="valid"):
    """Gradients of :func:`conv2d_forward`: ``(grad_input, grad_weights, grad_bias)``."""
    f, c, k, _ = weights.shape
    layer = Conv2D(c, f, k, padding)
    layer.params = {"W": np.asarray(weights, dtype=float), "b": np.zeros(f)}
    layer.forward(np.ascontiguousarray(x.transpose(1, 2, 0))[None])
    if grad_out.shape[0] != f:
        raise ValueError(f"grad_out {grad_out.shape} does not match {f} filters")
    gx = layer.backward(np.ascontiguousarray(grad_out.transpose(1, 2, 0))[None])
    return gx[0].transpose(2, 0, 1), layer.grads["W"], layer.grads["b"]


class Dense(Layer):
    kind = "dense"

    def __init__(self, in_features: int, out_features: int, init: str = "fan_in"):
        super().__init__()
        if init != "zeros" and init not in INIT_LIMITS:
            raise ValueError(f"unknown init {init!r}")
        self.in_features = in_features
        self.out_features = out_features
        self.init = init
        self.params = {"W": np.zeros((in_features, out_features)), "b": np.zeros(out_features)}
        self.grads = {"W": np.zeros((in_features, out_features)), "b": np.zeros(out_features)}
        self._x = None

    def init_params(self, rng):
        self.params["W"][...] = init_weights(rng, self.params["W"].shape, self.in_features, self.init)
        self.params["b"].fill(0.0)

    def output_shape(self, input_shape):
        if input_shape != (self.in_features,):
            raise ValueError(f"dense expects ({self.in_features},), got {input_shape}")
        return (self.out_features,)

    def forward(self, x):
        if x.shape[1:] != (self.in_features,):
            raise ValueError(f"dense expects ({self.in_features},) features, got {x.shape[1:]}")
        self._x = x
        return x @ self.params["W"] + self.params["b"]

    def backward(self, grad_out):
        self.grads["W"] += self._x.T @ grad_out
        self.grads["b"] += grad_out.sum(axis=0)
        if not self.need_input_grad:
            return None
        return grad_out @ self.params["W"].T

    def __repr__(self):
        return f"Dense({self.in_features}->{self.out_features})"


class ReLU(Layer):
    kind = "relu"

    def forward(self, x):
        self._mask = x > 0
        return x * self._mask

    def backward(self, grad_out):
        # subgradient 0 at exactly 0
        return grad_out * self._mask


class Flatten(Layer):
    kind = "flatten"

    def output_shape(self, input_shape):
        return (int(np.prod(input_shape)),)

    def forward(self, x):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad_out):
        return grad_out.reshape(self._shape)


class Concat(Layer):
    """Join flattened branch outputs along the feature axis."""

    kind = "concat"

    def output_shape_multi(self, shapes):
        return (sum(s[0] for s in shapes),)

    def forward_multi(self, xs):
        self._sizes = [x.shape[1] for x in xs]
        return np.concatenate(xs, axis=1)

    def backward_multi(self, grad_out):
        cuts = np.cumsum(self._sizes)[:-1]
        return np.split(grad_out, cuts, axis=1)
