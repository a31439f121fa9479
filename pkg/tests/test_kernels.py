"""Both kernel backends against brute-force loop oracles."""

import numpy as np
import pytest

from collm.kernels import numba_backend, numpy_backend

BACKENDS = [numpy_backend, numba_backend]
IDS = [m.NAME for m in BACKENDS]


def conv1d_oracle(x, w, b):
    """Triple-nested-loop reference convolution, f64."""
    nb, cin, length = x.shape
    cout, _, k = w.shape
    lout = length - k + 1
    y = np.zeros((nb, cout, lout))
    for n in range(nb):
        for o in range(cout):
            for t in range(lout):
                acc = b[o]
                for c in range(cin):
                    for j in range(k):
                        acc += w[o, c, j] * x[n, c, t + j]
                y[n, o, t] = acc
    return y


def maxpool_oracle(x, window, stride):
    nb, c, length = x.shape
    lout = (length - window) // stride + 1
    y = np.zeros((nb, c, lout))
    for n in range(nb):
        for ch in range(c):
            for t in range(lout):
                y[n, ch, t] = x[n, ch, t * stride:t * stride + window].max()
    return y


@pytest.mark.parametrize("backend", BACKENDS, ids=IDS)
class TestConv1d:
    def test_matches_loop_oracle(self, backend):
        rng = np.random.default_rng(42)
        for _ in range(5):
            x = rng.standard_normal((3, 2, 8))
            w = rng.standard_normal((3, 2, 3))
            b = rng.standard_normal(3)
            got = backend.conv1d_forward(x, w, b)
            assert np.abs(got - conv1d_oracle(x, w, b)).max() < 1e-12

    def test_identity_center_kernel(self, backend):
        x = np.array([[1.0, 2.0, 3.0, 4.0]])
        w = np.array([[[0.0, 1.0, 0.0]]])
        b = np.zeros(1)
        got = backend.conv1d_forward(x[None], w, b)[0]
        assert np.array_equal(got, [[2.0, 3.0]])

    def test_zero_input_gives_bias(self, backend):
        x = np.zeros((2, 3, 10))
        w = np.random.default_rng(0).standard_normal((4, 3, 3))
        b = np.array([1.0, -2.0, 0.5, 3.0])
        got = backend.conv1d_forward(x, w, b)
        assert np.allclose(got, b[None, :, None], atol=1e-15)

    def test_backward_matches_fd(self, backend):
        # gradients of sum(r * conv(x)) against central differences
        rng = np.random.default_rng(7)
        x = rng.standard_normal((2, 2, 9))
        w = rng.standard_normal((3, 2, 3))
        b = rng.standard_normal(3)
        r = rng.standard_normal((2, 3, 7))
        dw, db = backend.conv1d_backward_weight(r, x, 3)
        dx = backend.conv1d_backward_input(r, w, 9)
        h = 1e-6
        for arr, grad in ((x, dx), (w, dw), (b, db)):
            flat = arr.reshape(-1)
            for i in range(0, flat.size, max(1, flat.size // 10)):
                orig = flat[i]
                flat[i] = orig + h
                fp = float((backend.conv1d_forward(x, w, b) * r).sum())
                flat[i] = orig - h
                fm = float((backend.conv1d_forward(x, w, b) * r).sum())
                flat[i] = orig
                assert abs(grad.reshape(-1)[i] - (fp - fm) / (2 * h)) < 1e-6


@pytest.mark.parametrize("backend", BACKENDS, ids=IDS)
class TestMaxPool:
    def test_matches_naive_oracle(self, backend):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((2, 4, 16))
        for window, stride in ((2, 2), (3, 1), (4, 3)):
            y, idx = backend.maxpool1d_forward(x, window, stride)
            assert np.abs(y - maxpool_oracle(x, window, stride)).max() == 0.0
            # recorded indices point at the max values
            taken = np.take_along_axis(x, idx.reshape(2, 4, -1), axis=2)
            assert np.array_equal(taken, y)

    def test_simple_example(self, backend):
        x = np.array([[[1.0, 3.0, 2.0, 5.0]]])
        y, _ = backend.maxpool1d_forward(x, 2, 2)
        assert np.array_equal(y, [[[3.0, 5.0]]])

    def test_constant_input(self, backend):
        x = np.full((1, 2, 8), 4.25)
        y, _ = backend.maxpool1d_forward(x, 2, 2)
        assert np.all(y == 4.25)

    def test_backward_routes_to_argmax(self, backend):
        x = np.array([[[1.0, 3.0, 2.0, 5.0]]])
        y, idx = backend.maxpool1d_forward(x, 2, 2)
        dy = np.array([[[10.0, 20.0]]])
        dx = backend.maxpool1d_backward(dy, idx, 4)
        assert np.array_equal(dx, [[[0.0, 10.0, 0.0, 20.0]]])

    def test_tie_takes_first(self, backend):
        x = np.array([[[2.0, 2.0, 1.0, 1.0]]])
        _, idx = backend.maxpool1d_forward(x, 2, 2)
        assert idx.tolist() == [[[0, 2]]]


def test_backends_agree_elementwise():
    rng = np.random.default_rng(9)
    x = rng.standard_normal((3, 4, 12))
    w = rng.standard_normal((6, 4, 3))
    b = rng.standard_normal(6)
    assert np.allclose(
        numpy_backend.conv1d_forward(x, w, b),
        numba_backend.conv1d_forward(x, w, b),
        atol=1e-12,
    )
