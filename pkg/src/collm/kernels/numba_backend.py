"""Numba @njit implementations of the convolution/pooling hot loops.

Same contracts as ``numpy_backend``. Inner loops run along the
contiguous time axis so they vectorize; loops are serial (no prange) so
a fixed seed keeps training bitwise-reproducible regardless of thread
count.
"""

from __future__ import annotations

import numpy as np
from numba import njit

NAME = "numba"


@njit(cache=True)
def conv1d_forward(x, w, b):
    nb, cin, length = x.shape
    cout, _, k = w.shape
    lout = length - k + 1
    y = np.empty((nb, cout, lout), dtype=x.dtype)
    for n in range(nb):
        for o in range(cout):
            for t in range(lout):
                y[n, o, t] = b[o]
            for c in range(cin):
                for j in range(k):
                    wv = w[o, c, j]
                    for t in range(lout):
                        y[n, o, t] += wv * x[n, c, t + j]
    return y


@njit(cache=True)
def conv1d_backward_input(dy, w, length):
    nb, cout, lout = dy.shape
    _, cin, k = w.shape
    dx = np.zeros((nb, cin, length), dtype=dy.dtype)
    for n in range(nb):
        for c in range(cin):
            for o in range(cout):
                for j in range(k):
                    wv = w[o, c, j]
                    for t in range(lout):
                        dx[n, c, t + j] += wv * dy[n, o, t]
    return dx


@njit(cache=True)
def conv1d_backward_weight(dy, x, k):
    # accumulate over a transposed copy of dy so the inner loop runs
    # along contiguous output channels: elementwise FMA, no serialized
    # reduction, fixed summation order
    nb, cout, lout = dy.shape
    cin = x.shape[1]
    dwt = np.zeros((k, cin, cout), dtype=dy.dtype)
    db = np.zeros(cout, dtype=dy.dtype)
    for n in range(nb):
        dyt = np.ascontiguousarray(dy[n].T)  # (lout, cout)
        for t in range(lout):
            for o in range(cout):
                db[o] += dyt[t, o]
            for c in range(cin):
                for j in range(k):
                    g = x[n, c, t + j]
                    for o in range(cout):
                        dwt[j, c, o] += g * dyt[t, o]
    dw = np.empty((cout, cin, k), dtype=dy.dtype)
    for o in range(cout):
        for c in range(cin):
            for j in range(k):
                dw[o, c, j] = dwt[j, c, o]
    return dw, db


@njit(cache=True)
def maxpool1d_forward(x, window, stride):
    nb, c, length = x.shape
    lout = (length - window) // stride + 1
    y = np.empty((nb, c, lout), dtype=x.dtype)
    idx = np.empty((nb, c, lout), dtype=np.int64)
    for n in range(nb):
        for ch in range(c):
            for t in range(lout):
                start = t * stride
                best = start
                bestv = x[n, ch, start]
                for j in range(1, window):
                    v = x[n, ch, start + j]
                    if v > bestv:
                        bestv = v
                        best = start + j
                y[n, ch, t] = bestv
                idx[n, ch, t] = best
    return y, idx


@njit(cache=True)
def maxpool1d_backward(dy, idx, length):
    nb, c, lout = dy.shape
    dx = np.zeros((nb, c, length), dtype=dy.dtype)
    for n in range(nb):
        for ch in range(c):
            for t in range(lout):
                dx[n, ch, idx[n, ch, t]] += dy[n, ch, t]
    return dx
