"""Pure-numpy implementations of the convolution/pooling hot loops.

All functions take batched arrays: ``x`` is (B, C, L), kernels are
(C_out, C_in, K), pooling indices are int64 positions into the length
axis. These are the fallback path; see ``collm.kernels`` for selection.
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"


def conv1d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Valid cross-correlation, stride 1: (B, C_in, L) -> (B, C_out, L-K+1)."""
    k = w.shape[2]
    windows = np.lib.stride_tricks.sliding_window_view(x, k, axis=2)
    y = np.einsum("bclk,ock->bol", windows, w, optimize=True)
    y += b[None, :, None]
    return np.ascontiguousarray(y)


def conv1d_backward_input(dy: np.ndarray, w: np.ndarray, length: int) -> np.ndarray:
    lout = dy.shape[2]
    k = w.shape[2]
    dx = np.zeros((dy.shape[0], w.shape[1], length), dtype=dy.dtype)
    for j in range(k):
        dx[:, :, j:j + lout] += np.einsum("bol,oc->bcl", dy, w[:, :, j], optimize=True)
    return dx


def conv1d_backward_weight(dy: np.ndarray, x: np.ndarray, k: int):
    windows = np.lib.stride_tricks.sliding_window_view(x, k, axis=2)
    dw = np.einsum("bol,bclk->ock", dy, windows, optimize=True)
    db = dy.sum(axis=(0, 2))
    return np.ascontiguousarray(dw), db


def maxpool1d_forward(x: np.ndarray, window: int, stride: int):
    """Returns (values, argmax positions along L) for each window."""
    lout = (x.shape[2] - window) // stride + 1
    windows = np.lib.stride_tricks.sliding_window_view(x, window, axis=2)[:, :, ::stride]
    inner = windows.argmax(axis=3)
    y = np.take_along_axis(windows, inner[..., None], axis=3)[..., 0]
    idx = inner + stride * np.arange(lout, dtype=np.int64)[None, None, :]
    return np.ascontiguousarray(y), idx


def maxpool1d_backward(dy: np.ndarray, idx: np.ndarray, length: int) -> np.ndarray:
    nb, c, _ = dy.shape
    dx = np.zeros((nb, c, length), dtype=dy.dtype)
    np.add.at(
        dx,
        (np.arange(nb)[:, None, None], np.arange(c)[None, :, None], idx),
        dy,
    )
    return dx
