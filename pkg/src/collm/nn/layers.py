"""Batched layers with exact analytic gradients.

Every layer caches what its backward pass needs during forward, so one
``forward(training=True)`` followed by ``backward`` yields gradients for
all parameters. The layer set is closed: exactly the pieces the
classifiers use. Convolution and pooling run on the selected kernel
backend; everything else is plain numpy.
"""

from __future__ import annotations

import numpy as np

from collm import kernels
from collm.errors import ConfigError, ShapeError, UsageError
from collm.nn.functional import softmax


def glorot_uniform(rng, shape, fan_in, fan_out, dtype):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Layer:
    """Base class; stateless layers only override forward/backward."""

    def __init__(self, name: str):
        self.name = name

    def params(self) -> dict[str, np.ndarray]:
        return {}

    def grads(self) -> dict[str, np.ndarray]:
        return {}

    def init_params(self, rng, dtype) -> None:
        pass

    def forward(self, x, training=False, rng=None):
        raise NotImplementedError

    def backward(self, dy):
        raise NotImplementedError


class Conv1d(Layer):
    def __init__(self, name, in_channels, out_channels, kernel_size):
        super().__init__(name)
        if min(in_channels, out_channels, kernel_size) < 1:
            raise ConfigError(f"{name}: conv hyperparameters must be positive")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.w = None
        self.b = None
        self._x = None
        self.dw = None
        self.db = None

    def init_params(self, rng, dtype):
        fan_in = self.in_channels * self.kernel_size
        fan_out = self.out_channels * self.kernel_size
        self.w = glorot_uniform(
            rng, (self.out_channels, self.in_channels, self.kernel_size),
            fan_in, fan_out, dtype,
        )
        self.b = np.zeros(self.out_channels, dtype=dtype)

    def params(self):
        return {f"{self.name}.weight": self.w, f"{self.name}.bias": self.b}

    def grads(self):
        return {f"{self.name}.weight": self.dw, f"{self.name}.bias": self.db}

    def forward(self, x, training=False, rng=None):
        if x.ndim != 3 or x.shape[1] != self.in_channels:
            raise ShapeError(
                f"{self.name}: expected (B, {self.in_channels}, L), got {x.shape}"
            )
        if x.shape[2] < self.kernel_size:
            raise ShapeError(
                f"{self.name}: length {x.shape[2]} shorter than kernel "
                f"{self.kernel_size}"
            )
        self._x = x
        return kernels.conv1d_forward(x, self.w, self.b)

    def backward(self, dy):
        if self._x is None:
            raise UsageError(f"{self.name}: backward called before forward")
        self.dw, self.db = kernels.conv1d_backward_weight(dy, self._x, self.kernel_size)
        return kernels.conv1d_backward_input(dy, self.w, self._x.shape[2])


class MaxPool1d(Layer):
    def __init__(self, name, window, stride):
        super().__init__(name)
        if window < 1 or stride < 1:
            raise ConfigError(f"{name}: window and stride must be positive")
        self.window = window
        self.stride = stride
        self._idx = None
        self._length = None

    def forward(self, x, training=False, rng=None):
        if x.shape[2] < self.window:
            raise ShapeError(
                f"{self.name}: pool window {self.window} exceeds length {x.shape[2]}"
            )
        y, self._idx = kernels.maxpool1d_forward(x, self.window, self.stride)
        self._length = x.shape[2]
        return y

    def backward(self, dy):
        if self._idx is None:
            raise UsageError(f"{self.name}: backward called before forward")
        return kernels.maxpool1d_backward(dy, self._idx, self._length)


class ReLU(Layer):
    def __init__(self, name):
        super().__init__(name)
        self._mask = None

    def forward(self, x, training=False, rng=None):
        self._mask = x > 0
        return x * self._mask

    def backward(self, dy):
        if self._mask is None:
            raise UsageError(f"{self.name}: backward called before forward")
        return dy * self._mask


class Flatten(Layer):
    def __init__(self, name):
        super().__init__(name)
        self._shape = None

    def forward(self, x, training=False, rng=None):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy):
        return dy.reshape(self._shape)


class Dense(Layer):
    def __init__(self, name, in_features, units):
        super().__init__(name)
        if in_features < 1 or units < 1:
            raise ConfigError(f"{name}: dense dimensions must be positive")
        self.in_features = in_features
        self.units = units
        self.w = None
        self.b = None
        self._x = None
        self.dw = None
        self.db = None

    def init_params(self, rng, dtype):
        self.w = glorot_uniform(
            rng, (self.units, self.in_features), self.in_features, self.units, dtype
        )
        self.b = np.zeros(self.units, dtype=dtype)

    def params(self):
        return {f"{self.name}.weight": self.w, f"{self.name}.bias": self.b}

    def grads(self):
        return {f"{self.name}.weight": self.dw, f"{self.name}.bias": self.db}

    def forward(self, x, training=False, rng=None):
        if x.shape[-1] != self.in_features:
            raise ShapeError(
                f"{self.name}: expected {self.in_features} features, got {x.shape}"
            )
        self._x = x
        return x @ self.w.T + self.b

    def backward(self, dy):
        if self._x is None:
            raise UsageError(f"{self.name}: backward called before forward")
        x2 = self._x.reshape(-1, self.in_features)
        dy2 = dy.reshape(-1, self.units)
        self.dw = dy2.T @ x2
        self.db = dy2.sum(axis=0)
        return dy @ self.w


class Dropout(Layer):
    """Inverted dropout; identity at inference or rate 0."""

    def __init__(self, name, rate):
        super().__init__(name)
        if not (0.0 <= rate < 1.0):
            raise ConfigError(f"{name}: dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self._mask = None

    def forward(self, x, training=False, rng=None):
        if not training or self.rate == 0.0:
            self._mask = None
            return x
        if rng is None:
            raise ConfigError(f"{self.name}: training-mode dropout requires an rng")
        keep = rng.random(x.shape) >= self.rate
        self._mask = keep.astype(x.dtype) / x.dtype.type(1.0 - self.rate)
        return x * self._mask

    def backward(self, dy):
        if self._mask is None:
            return dy
        return dy * self._mask


class LayerNorm(Layer):
    """Normalization over the last axis with learned gain and shift."""

    def __init__(self, name, dim, eps=1e-5):
        super().__init__(name)
        self.dim = dim
        self.eps = eps
        self.gain = None
        self.shift = None
        self._xhat = None
        self._inv_std = None
        self.dgain = None
        self.dshift = None

    def init_params(self, rng, dtype):
        self.gain = np.ones(self.dim, dtype=dtype)
        self.shift = np.zeros(self.dim, dtype=dtype)

    def params(self):
        return {f"{self.name}.gain": self.gain, f"{self.name}.shift": self.shift}

    def grads(self):
        return {f"{self.name}.gain": self.dgain, f"{self.name}.shift": self.dshift}

    def forward(self, x, training=False, rng=None):
        if x.shape[-1] != self.dim:
            raise ShapeError(f"{self.name}: expected last axis {self.dim}, got {x.shape}")
        mu = x.mean(axis=-1, keepdims=True)
        var = x.var(axis=-1, keepdims=True)
        self._inv_std = 1.0 / np.sqrt(var + self.eps)
        self._xhat = (x - mu) * self._inv_std
        return self.gain * self._xhat + self.shift

    def backward(self, dy):
        if self._xhat is None:
            raise UsageError(f"{self.name}: backward called before forward")
        axes = tuple(range(dy.ndim - 1))
        self.dgain = (dy * self._xhat).sum(axis=axes)
        self.dshift = dy.sum(axis=axes)
        g = dy * self.gain
        gm = g.mean(axis=-1, keepdims=True)
        gxm = (g * self._xhat).mean(axis=-1, keepdims=True)
        return self._inv_std * (g - gm - self._xhat * gxm)


class MultiHeadAttention(Layer):
    """Scaled dot-product self-attention over (B, T, d_model)."""

    def __init__(self, name, d_model, heads):
        super().__init__(name)
        if d_model % heads != 0:
            raise ConfigError(
                f"{name}: model width {d_model} not divisible by {heads} heads"
            )
        self.d_model = d_model
        self.heads = heads
        self.d_head = d_model // heads
        self.proj = {}       # wq, wk, wv, wo
        self.bias = {}       # bq, bk, bv, bo
        self.dproj = {}
        self.dbias = {}
        self._cache = None

    _ORDER = ("q", "k", "v", "out")

    def init_params(self, rng, dtype):
        for key in self._ORDER:
            self.proj[key] = glorot_uniform(
                rng, (self.d_model, self.d_model), self.d_model, self.d_model, dtype
            )
            self.bias[key] = np.zeros(self.d_model, dtype=dtype)

    def params(self):
        out = {}
        for key in self._ORDER:
            out[f"{self.name}.{key}.weight"] = self.proj[key]
            out[f"{self.name}.{key}.bias"] = self.bias[key]
        return out

    def grads(self):
        out = {}
        for key in self._ORDER:
            out[f"{self.name}.{key}.weight"] = self.dproj[key]
            out[f"{self.name}.{key}.bias"] = self.dbias[key]
        return out

    def _split(self, x):
        b, t, _ = x.shape
        return x.reshape(b, t, self.heads, self.d_head).transpose(0, 2, 1, 3)

    def _join(self, x):
        b, h, t, d = x.shape
        return x.transpose(0, 2, 1, 3).reshape(b, t, h * d)

    def forward(self, x, training=False, rng=None):
        if x.ndim != 3 or x.shape[2] != self.d_model:
            raise ShapeError(
                f"{self.name}: expected (B, T, {self.d_model}), got {x.shape}"
            )
        q = self._split(x @ self.proj["q"].T + self.bias["q"])
        k = self._split(x @ self.proj["k"].T + self.bias["k"])
        v = self._split(x @ self.proj["v"].T + self.bias["v"])
        scale = 1.0 / np.sqrt(self.d_head)
        attn = softmax(q @ k.transpose(0, 1, 3, 2) * scale, axis=-1)
        heads_out = self._join(attn @ v)
        self._cache = (x, q, k, v, attn, heads_out, scale)
        return heads_out @ self.proj["out"].T + self.bias["out"]

    def backward(self, dy):
        if self._cache is None:
            raise UsageError(f"{self.name}: backward called before forward")
        x, q, k, v, attn, heads_out, scale = self._cache
        d = self.d_model
        dy2 = dy.reshape(-1, d)
        self.dproj["out"] = dy2.T @ heads_out.reshape(-1, d)
        self.dbias["out"] = dy2.sum(axis=0)
        dheads = self._split(dy @ self.proj["out"])
        dattn = dheads @ v.transpose(0, 1, 3, 2)
        dv = attn.transpose(0, 1, 3, 2) @ dheads
        dscores = attn * (dattn - (dattn * attn).sum(axis=-1, keepdims=True))
        dq = dscores @ k * scale
        dk = dscores.transpose(0, 1, 3, 2) @ q * scale
        dx = np.zeros_like(x)
        for key, dmat in (("q", dq), ("k", dk), ("v", dv)):
            flat = self._join(dmat).reshape(-1, d)
            self.dproj[key] = flat.T @ x.reshape(-1, d)
            self.dbias[key] = flat.sum(axis=0)
            dx += self._join(dmat) @ self.proj[key]
        return dx


class EncoderBlock(Layer):
    """Post-norm transformer encoder block.

    attention -> residual -> layer norm -> position-wise FFN (two dense
    layers with ReLU) -> residual -> layer norm. Maps (B, T, d_model) to
    the same shape.
    """

    def __init__(self, name, d_model, heads, ffn_hidden):
        super().__init__(name)
        self.d_model = d_model
        self.attn = MultiHeadAttention(f"{name}.attn", d_model, heads)
        self.ln1 = LayerNorm(f"{name}.ln1", d_model)
        self.ffn_fc1 = Dense(f"{name}.ffn.fc1", d_model, ffn_hidden)
        self.ffn_relu = ReLU(f"{name}.ffn.relu")
        self.ffn_fc2 = Dense(f"{name}.ffn.fc2", ffn_hidden, d_model)
        self.ln2 = LayerNorm(f"{name}.ln2", d_model)

    def _sublayers(self):
        return (self.attn, self.ln1, self.ffn_fc1, self.ffn_fc2, self.ln2)

    def init_params(self, rng, dtype):
        for sub in self._sublayers():
            sub.init_params(rng, dtype)

    def params(self):
        out = {}
        for sub in self._sublayers():
            out.update(sub.params())
        return out

    def grads(self):
        out = {}
        for sub in self._sublayers():
            out.update(sub.grads())
        return out

    def forward(self, x, training=False, rng=None):
        h = self.ln1.forward(x + self.attn.forward(x, training, rng))
        f = self.ffn_fc2.forward(self.ffn_relu.forward(self.ffn_fc1.forward(h)))
        return self.ln2.forward(h + f)

    def backward(self, dy):
        dr2 = self.ln2.backward(dy)
        dh = dr2 + self.ffn_fc1.backward(
            self.ffn_relu.backward(self.ffn_fc2.backward(dr2))
        )
        dr1 = self.ln1.backward(dh)
        return dr1 + self.attn.backward(dr1)


class ToSequence(Layer):
    """Layout adapter: channels-first (B, C, T) to sequence (B, T, C)."""

    def forward(self, x, training=False, rng=None):
        return np.ascontiguousarray(x.transpose(0, 2, 1))

    def backward(self, dy):
        return np.ascontiguousarray(dy.transpose(0, 2, 1))


class GlobalAvgPool(Layer):
    """Mean over the time axis: (B, T, D) -> (B, D)."""

    def __init__(self, name):
        super().__init__(name)
        self._t = None

    def forward(self, x, training=False, rng=None):
        self._t = x.shape[1]
        return x.mean(axis=1)

    def backward(self, dy):
        if self._t is None:
            raise UsageError(f"{self.name}: backward called before forward")
        return np.repeat(dy[:, None, :], self._t, axis=1) / self._t
