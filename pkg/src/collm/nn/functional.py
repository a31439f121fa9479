"""Single-sample forward operations.

These are the primitive building blocks of the classifiers, exposed with
unbatched signatures for direct use and testing. Training goes through
the layer classes in ``collm.nn.layers``, which call the same kernels on
batched arrays.
"""

from __future__ import annotations

import numpy as np

from collm import kernels
from collm.errors import ConfigError, ShapeError


def conv1d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Valid 1-D cross-correlation with stride 1.

    ``x`` is (C_in, L), ``w`` is (C_out, C_in, K), ``b`` is (C_out,);
    output is (C_out, L - K + 1).
    """
    x, w, b = np.asarray(x), np.asarray(w), np.asarray(b)
    if x.ndim != 2 or w.ndim != 3 or b.ndim != 1:
        raise ShapeError(
            f"conv1d expects x (C_in, L), w (C_out, C_in, K), b (C_out,); "
            f"got {x.shape}, {w.shape}, {b.shape}"
        )
    if w.shape[1] != x.shape[0] or w.shape[0] != b.shape[0]:
        raise ShapeError(
            f"conv1d channel mismatch: x has {x.shape[0]} channels, "
            f"w is {w.shape}, b is {b.shape}"
        )
    if x.shape[1] < w.shape[2]:
        raise ShapeError(
            f"input length {x.shape[1]} is shorter than kernel size {w.shape[2]}"
        )
    return kernels.conv1d_forward(x[None], w, b)[0]


def maxpool1d_forward(
    x: np.ndarray, window: int, stride: int, return_indices: bool = False
):
    """Max pooling over (C, L); output length floor((L-window)/stride)+1."""
    x = np.asarray(x)
    if x.ndim != 2:
        raise ShapeError(f"maxpool1d expects (C, L), got {x.shape}")
    if window < 1 or stride < 1:
        raise ConfigError(f"window and stride must be positive, got {window}, {stride}")
    if window > x.shape[1]:
        raise ShapeError(
            f"pool window {window} exceeds input length {x.shape[1]}"
        )
    y, idx = kernels.maxpool1d_forward(x[None], window, stride)
    return (y[0], idx[0]) if return_indices else y[0]


def dense_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Affine map: ``w @ x + b`` with ``w`` of shape (U, D)."""
    x, w, b = np.asarray(x), np.asarray(w), np.asarray(b)
    if x.ndim != 1 or w.ndim != 2 or b.ndim != 1:
        raise ShapeError(
            f"dense expects x (D,), w (U, D), b (U,); got {x.shape}, {w.shape}, {b.shape}"
        )
    if w.shape[1] != x.shape[0] or w.shape[0] != b.shape[0]:
        raise ShapeError(f"dense shape mismatch: x {x.shape}, w {w.shape}, b {b.shape}")
    return w @ x + b


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(np.asarray(x), 0)


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    """Numerically stable softmax (max subtraction along ``axis``)."""
    z = np.asarray(logits)
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def layer_norm(
    x: np.ndarray, gain: np.ndarray, shift: np.ndarray, eps: float = 1e-5
) -> np.ndarray:
    """Normalize over the last axis, then scale and shift elementwise."""
    x = np.asarray(x)
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return gain * (x - mu) / np.sqrt(var + eps) + shift


def mha_forward(
    x: np.ndarray, weights: dict[str, np.ndarray], heads: int = 8
) -> np.ndarray:
    """Multi-head scaled dot-product self-attention on (T, d_model).

    ``weights`` holds the projection matrices ``wq, wk, wv, wo`` (each
    d_model x d_model) and optional biases ``bq, bk, bv, bo``. Residual
    connection and layer norm are the enclosing encoder block's job.
    """
    x = np.asarray(x)
    if x.ndim != 2:
        raise ShapeError(f"attention expects (T, d_model), got {x.shape}")
    d_model = x.shape[1]
    if d_model % heads != 0:
        raise ConfigError(f"model width {d_model} is not divisible by {heads} heads")
    d_head = d_model // heads
    zeros = np.zeros(d_model, dtype=x.dtype)
    q = x @ weights["wq"].T + weights.get("bq", zeros)
    k = x @ weights["wk"].T + weights.get("bk", zeros)
    v = x @ weights["wv"].T + weights.get("bv", zeros)
    t = x.shape[0]
    # (heads, T, d_head)
    q = q.reshape(t, heads, d_head).transpose(1, 0, 2)
    k = k.reshape(t, heads, d_head).transpose(1, 0, 2)
    v = v.reshape(t, heads, d_head).transpose(1, 0, 2)
    scores = q @ k.transpose(0, 2, 1) / np.sqrt(d_head)
    attn = softmax(scores, axis=-1)
    out = (attn @ v).transpose(1, 0, 2).reshape(t, d_model)
    return out @ weights["wo"].T + weights.get("bo", zeros)


def dropout_forward(
    x: np.ndarray,
    rate: float,
    rng: np.random.Generator | None = None,
    training: bool = False,
) -> np.ndarray:
    """Inverted dropout: kept units are scaled by 1/(1-rate) in training
    mode; inference mode is the identity."""
    if not (0.0 <= rate < 1.0):
        raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
    x = np.asarray(x)
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ConfigError("training-mode dropout requires an rng")
    mask = rng.random(x.shape) >= rate
    return x * mask / (1.0 - rate)
