"""Network container: one or two feature streams plus a shared classifier tail.

Single-input models have one stream; representation-fusion models run two
streams (one per embedding source) and concatenate their pooled features
before the fully connected tail. The container owns nothing clever: it
walks layers forward, walks them backward, and exposes named parameters.
"""

from __future__ import annotations

import numpy as np

from collm.errors import ShapeError, UsageError


class Network:
    def __init__(self, arch_hash: str, input_dims: list[int], streams, tail, dtype):
        self.arch_hash = arch_hash
        self.input_dims = list(input_dims)
        self.streams = streams
        self.tail = tail
        self.dtype = np.dtype(dtype)
        self._stream_widths: list[int] | None = None

    def _all_layers(self):
        for stream in self.streams:
            yield from stream
        yield from self.tail

    def init_params(self, rng) -> None:
        for layer in self._all_layers():
            layer.init_params(rng, self.dtype)

    def params(self) -> dict[str, np.ndarray]:
        out = {}
        for layer in self._all_layers():
            out.update(layer.params())
        return out

    def grads(self) -> dict[str, np.ndarray]:
        out = {}
        for layer in self._all_layers():
            out.update(layer.grads())
        return out

    def state_copy(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.params().items()}

    def load_state(self, tensors: dict[str, np.ndarray]) -> None:
        own = self.params()
        if set(own) != set(tensors):
            missing = sorted(set(own) ^ set(tensors))
            raise ShapeError(f"parameter name mismatch, offending names: {missing[:5]}")
        for name, arr in own.items():
            src = tensors[name]
            if src.shape != arr.shape:
                raise ShapeError(
                    f"tensor {name}: expected shape {arr.shape}, got {src.shape}"
                )
            arr[...] = src.astype(self.dtype)

    def forward(self, xs, training: bool = False, rng=None) -> np.ndarray:
        """Map per-stream embedding batches [(B, dim), ...] to logits (B, 2)."""
        if len(xs) != len(self.streams):
            raise ShapeError(
                f"model takes {len(self.streams)} input stream(s), got {len(xs)}"
            )
        feats = []
        widths = []
        for i, (x, stream) in enumerate(zip(xs, self.streams)):
            x = np.asarray(x, dtype=self.dtype)
            if x.ndim != 2 or x.shape[1] != self.input_dims[i]:
                raise ShapeError(
                    f"stream {i}: expected (B, {self.input_dims[i]}), got {x.shape}"
                )
            h = x[:, None, :]
            for layer in stream:
                h = layer.forward(h, training=training, rng=rng)
            feats.append(h)
            widths.append(h.shape[1])
        self._stream_widths = widths
        h = feats[0] if len(feats) == 1 else np.concatenate(feats, axis=1)
        for layer in self.tail:
            h = layer.forward(h, training=training, rng=rng)
        return h

    def backward(self, dlogits: np.ndarray) -> None:
        if self._stream_widths is None:
            raise UsageError("backward called before forward")
        d = dlogits
        for layer in reversed(self.tail):
            d = layer.backward(d)
        offset = 0
        for width, stream in zip(self._stream_widths, self.streams):
            ds = d[:, offset:offset + width]
            offset += width
            for layer in reversed(stream):
                ds = layer.backward(ds)
