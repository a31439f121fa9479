"""Classifier architectures, canonical specs, and checkpoints.

Three model families operate on pre-extracted speech embeddings: a CNN
(two conv/pool stages then fully connected layers), a transformer (same
conv block, one encoder block, average pooling), and a two-stream fusion
model that concatenates per-stream features before the shared tail.
Block kinds are never mixed across fusion streams.

An ``ArchitectureSpec`` is the canonical, hashable description of one
topology; checkpoints embed the spec plus named weight tensors, and two
checkpoints are merge-compatible exactly when their spec hashes agree.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from collm.errors import ConfigError, DataError, IncompatibleArchitectureError
from collm.nn import layers as L
from collm.nn.functional import softmax
from collm.nn.network import Network
from collm.rng import make_rng

# Embedding width produced by each supported pre-trained speech model.
# The 768-dim slot covers both candidate monolingual extractors, which
# share that width.
PTM_DIMS = {
    "trillsson": 1024,
    "mms": 1280,
    "whisper": 512,
    "wavlm_or_unispeechsat": 768,
    "xvector": 512,
}

DEFAULT_CONV_CHANNELS = (32, 64)
DEFAULT_KERNEL_SIZE = 3
DEFAULT_POOL = (2, 2)  # window, stride
DEFAULT_FCN_WIDTHS = (256, 90, 56)
DEFAULT_HEADS = 8
DEFAULT_FFN_HIDDEN = 128
NUM_CLASSES = 2
MIN_INPUT_DIM = 16


@dataclass(frozen=True)
class PtmInfo:
    """An embedding source: extractor name plus its output dimension."""

    name: str
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigError(f"embedding dimension must be positive, got {self.dim}")
        known = PTM_DIMS.get(self.name)
        if known is not None and known != self.dim:
            raise ConfigError(
                f"{self.name} embeddings are {known}-dimensional, got {self.dim}"
            )

    @classmethod
    def of(cls, name: str) -> "PtmInfo":
        if name not in PTM_DIMS:
            raise ConfigError(
                f"unknown extractor {name!r}; known: {sorted(PTM_DIMS)}"
            )
        return cls(name, PTM_DIMS[name])


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


@dataclass
class ArchitectureSpec:
    """Ordered layer list with all hyperparameters, plus input descriptors.

    ``layers`` is the canonical flat list; entry order is execution order,
    with per-stream entries prefixed ``s0.`` / ``s1.``. The hash covers
    the whole canonical serialization and nothing else, so it is stable
    under re-serialization and blind to checkpoint metadata.
    """

    block: str
    inputs: tuple[tuple[str, int], ...]
    layers: tuple[dict, ...]

    def __post_init__(self):
        if self.block not in ("conv", "transformer"):
            raise ConfigError(f"unknown block kind {self.block!r}")
        self.inputs = tuple((str(p), int(d)) for p, d in self.inputs)
        if len(self.inputs) not in (1, 2):
            raise ConfigError("a model takes one or two input streams")
        self.layers = tuple(dict(e) for e in self.layers)

    def to_dict(self) -> dict:
        return {
            "block": self.block,
            "inputs": [[p, d] for p, d in self.inputs],
            "layers": [dict(e) for e in self.layers],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ArchitectureSpec":
        try:
            return cls(
                block=d["block"],
                inputs=tuple((p, int(dim)) for p, dim in d["inputs"]),
                layers=tuple(d["layers"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed architecture spec: {exc}") from exc

    def canonical_json(self) -> str:
        return _canonical_json(self.to_dict())

    @property
    def arch_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()

    def input_dims(self) -> list[int]:
        return [d for _, d in self.inputs]


def _conv_stack(prefix: str, dim: int, channels, kernel, pool) -> tuple[list[dict], int, int]:
    """Layer entries for one conv/pool block; returns (entries, out_channels, out_len)."""
    window, stride = pool
    entries = []
    length = dim
    in_ch = 1
    for i, out_ch in enumerate(channels, start=1):
        if length < kernel:
            raise ConfigError(
                f"input dim {dim} is too short for conv stage {i} "
                f"(length {length} < kernel {kernel})"
            )
        entries.append({
            "kind": "conv1d", "name": f"{prefix}.conv{i}",
            "in_channels": in_ch, "out_channels": out_ch, "kernel_size": kernel,
        })
        length = length - kernel + 1
        entries.append({"kind": "relu", "name": f"{prefix}.relu{i}"})
        if length < window:
            raise ConfigError(
                f"input dim {dim} is too short for pool stage {i} "
                f"(length {length} < window {window})"
            )
        entries.append({
            "kind": "maxpool1d", "name": f"{prefix}.pool{i}",
            "window": window, "stride": stride,
        })
        length = (length - window) // stride + 1
        in_ch = out_ch
    return entries, in_ch, length


def _stream_entries(prefix: str, dim: int, block: str, *, channels, kernel, pool,
                    heads, ffn_hidden) -> tuple[list[dict], int]:
    """Entries for one full stream; returns (entries, feature width)."""
    if dim < MIN_INPUT_DIM:
        raise ConfigError(
            f"embedding dimension {dim} is below the minimum {MIN_INPUT_DIM}"
        )
    entries, out_ch, length = _conv_stack(prefix, dim, channels, kernel, pool)
    if block == "conv":
        width = out_ch * length
        entries.append({"kind": "flatten", "name": f"{prefix}.flatten", "width": width})
        return entries, width
    if out_ch % heads != 0:
        raise ConfigError(f"model width {out_ch} is not divisible by {heads} heads")
    entries.extend([
        {"kind": "multihead_attention", "name": f"{prefix}.enc.attn",
         "d_model": out_ch, "heads": heads},
        {"kind": "layernorm", "name": f"{prefix}.enc.ln1", "dim": out_ch},
        {"kind": "ffn", "name": f"{prefix}.enc.ffn", "d_model": out_ch,
         "hidden": ffn_hidden},
        {"kind": "layernorm", "name": f"{prefix}.enc.ln2", "dim": out_ch},
        {"kind": "global_avg_pool", "name": f"{prefix}.gap", "width": out_ch},
    ])
    return entries, out_ch


def _tail_entries(width: int, fcn_widths) -> list[dict]:
    entries = []
    in_features = width
    for i, units in enumerate(fcn_widths, start=1):
        entries.append({
            "kind": "dense", "name": f"fcn.fc{i}",
            "in_features": in_features, "units": units,
        })
        entries.append({"kind": "relu", "name": f"fcn.relu{i}"})
        if i < len(fcn_widths):
            # regularization slots after the first hidden layers; the rate
            # is a training-time setting and not part of the topology hash
            entries.append({"kind": "dropout", "name": f"fcn.drop{i}"})
        in_features = units
    entries.append({
        "kind": "softmax_head", "name": "head",
        "in_features": in_features, "units": NUM_CLASSES,
    })
    return entries


def _build_single(dim: int, ptm: str, block: str, *, channels, kernel, pool,
                  fcn_widths, heads, ffn_hidden) -> ArchitectureSpec:
    entries, width = _stream_entries(
        "s0", dim, block, channels=channels, kernel=kernel, pool=pool,
        heads=heads, ffn_hidden=ffn_hidden,
    )
    entries.extend(_tail_entries(width, fcn_widths))
    return ArchitectureSpec(block=block, inputs=((ptm, dim),), layers=tuple(entries))


def build_cnn(dim: int, ptm: str = "embedding", *, channels=DEFAULT_CONV_CHANNELS,
              kernel=DEFAULT_KERNEL_SIZE, pool=DEFAULT_POOL,
              fcn_widths=DEFAULT_FCN_WIDTHS) -> ArchitectureSpec:
    """CNN classifier: conv/pool x2, flatten, FCN, 2-way softmax head."""
    return _build_single(dim, ptm, "conv", channels=channels, kernel=kernel,
                         pool=pool, fcn_widths=fcn_widths,
                         heads=DEFAULT_HEADS, ffn_hidden=DEFAULT_FFN_HIDDEN)


def build_transformer(dim: int, ptm: str = "embedding", *,
                      channels=DEFAULT_CONV_CHANNELS, kernel=DEFAULT_KERNEL_SIZE,
                      pool=DEFAULT_POOL, fcn_widths=DEFAULT_FCN_WIDTHS,
                      heads=DEFAULT_HEADS, ffn_hidden=DEFAULT_FFN_HIDDEN) -> ArchitectureSpec:
    """Same conv block as the CNN, one post-norm encoder block, average
    pooling over time, then the shared FCN tail."""
    return _build_single(dim, ptm, "transformer", channels=channels, kernel=kernel,
                         pool=pool, fcn_widths=fcn_widths, heads=heads,
                         ffn_hidden=ffn_hidden)


def build_fusion(a: PtmInfo, b: PtmInfo, block: str, *,
                 channels=DEFAULT_CONV_CHANNELS, kernel=DEFAULT_KERNEL_SIZE,
                 pool=DEFAULT_POOL, fcn_widths=DEFAULT_FCN_WIDTHS,
                 heads=DEFAULT_HEADS, ffn_hidden=DEFAULT_FFN_HIDDEN) -> ArchitectureSpec:
    """Two-stream fusion model; both streams use the same block kind."""
    if block not in ("conv", "transformer"):
        raise ConfigError(
            f"fusion streams must share one block kind ('conv' or 'transformer'), "
            f"got {block!r}"
        )
    if a.name == b.name:
        raise ConfigError(f"fusion requires two distinct embedding sources, got "
                          f"{a.name!r} twice")
    entries = []
    widths = []
    for i, src in enumerate((a, b)):
        stream, width = _stream_entries(
            f"s{i}", src.dim, block, channels=channels, kernel=kernel, pool=pool,
            heads=heads, ffn_hidden=ffn_hidden,
        )
        entries.extend(stream)
        widths.append(width)
    entries.extend(_tail_entries(sum(widths), fcn_widths))
    return ArchitectureSpec(
        block=block,
        inputs=((a.name, a.dim), (b.name, b.dim)),
        layers=tuple(entries),
    )


def parameter_shapes(spec: ArchitectureSpec) -> dict[str, tuple[int, ...]]:
    """Expected name -> shape map for every trainable tensor of ``spec``."""
    shapes: dict[str, tuple[int, ...]] = {}
    for e in spec.layers:
        kind, name = e["kind"], e["name"]
        if kind == "conv1d":
            shapes[f"{name}.weight"] = (
                e["out_channels"], e["in_channels"], e["kernel_size"])
            shapes[f"{name}.bias"] = (e["out_channels"],)
        elif kind in ("dense", "softmax_head"):
            shapes[f"{name}.weight"] = (e["units"], e["in_features"])
            shapes[f"{name}.bias"] = (e["units"],)
        elif kind == "layernorm":
            shapes[f"{name}.gain"] = (e["dim"],)
            shapes[f"{name}.shift"] = (e["dim"],)
        elif kind == "multihead_attention":
            d = e["d_model"]
            for key in ("q", "k", "v", "out"):
                shapes[f"{name}.{key}.weight"] = (d, d)
                shapes[f"{name}.{key}.bias"] = (d,)
        elif kind == "ffn":
            d, hidden = e["d_model"], e["hidden"]
            shapes[f"{name}.fc1.weight"] = (hidden, d)
            shapes[f"{name}.fc1.bias"] = (hidden,)
            shapes[f"{name}.fc2.weight"] = (d, hidden)
            shapes[f"{name}.fc2.bias"] = (d,)
    return shapes


def _build_layer_objects(entries: list[dict], dropout_rate: float):
    built = []
    i = 0
    while i < len(entries):
        e = entries[i]
        kind, name = e["kind"], e["name"]
        if kind == "conv1d":
            built.append(L.Conv1d(name, e["in_channels"], e["out_channels"],
                                  e["kernel_size"]))
        elif kind == "relu":
            built.append(L.ReLU(name))
        elif kind == "maxpool1d":
            built.append(L.MaxPool1d(name, e["window"], e["stride"]))
        elif kind == "flatten":
            built.append(L.Flatten(name))
        elif kind == "multihead_attention":
            scope = name.removesuffix(".attn")
            trailer = entries[i + 1:i + 4]
            kinds = [t["kind"] for t in trailer]
            if kinds != ["layernorm", "ffn", "layernorm"]:
                raise ConfigError(
                    f"encoder block {scope}: expected layernorm/ffn/layernorm "
                    f"after attention, got {kinds}"
                )
            ffn = trailer[1]
            built.append(L.ToSequence(f"{scope}.to_seq"))
            built.append(L.EncoderBlock(scope, e["d_model"], e["heads"],
                                        ffn["hidden"]))
            i += 3
        elif kind == "global_avg_pool":
            built.append(L.GlobalAvgPool(name))
        elif kind in ("dense", "softmax_head"):
            built.append(L.Dense(name, e["in_features"], e["units"]))
        elif kind == "dropout":
            built.append(L.Dropout(name, dropout_rate))
        else:
            raise ConfigError(f"unknown layer kind {kind!r}")
        i += 1
    return built


def instantiate(spec: ArchitectureSpec, dtype=np.float32, dropout_rate: float = 0.0,
                init_rng=None) -> Network:
    """Build a runnable network for ``spec``.

    Parameters are zero until ``init_rng`` draws them (fan-scaled uniform
    weights, zero biases, identity layer norms) or a checkpoint is loaded.
    """
    n_streams = len(spec.inputs)
    streams: list[list] = [[] for _ in range(n_streams)]
    tail_entries: list[dict] = []
    stream_entries: list[list[dict]] = [[] for _ in range(n_streams)]
    for e in spec.layers:
        name = e["name"]
        placed = False
        for i in range(n_streams):
            if name.startswith(f"s{i}."):
                stream_entries[i].append(e)
                placed = True
                break
        if not placed:
            tail_entries.append(e)
    for i in range(n_streams):
        streams[i] = _build_layer_objects(stream_entries[i], dropout_rate)
    tail = _build_layer_objects(tail_entries, dropout_rate)
    net = Network(spec.arch_hash, spec.input_dims(), streams, tail, dtype)
    for layer in net._all_layers():
        layer.init_params(_ZeroRng(), np.dtype(dtype))
    if init_rng is not None:
        if isinstance(init_rng, (int, np.integer)):
            init_rng = make_rng(int(init_rng))
        net.init_params(init_rng)
    return net


class _ZeroRng:
    """Placeholder generator: allocates zero-valued parameters so shapes
    exist before a checkpoint load or a real init."""

    def uniform(self, low, high, size):
        return np.zeros(size)


@dataclass
class Checkpoint:
    """Named weight tensors for one architecture, plus merge metadata.

    ``merge_count`` is 1 for freshly trained models and the number of
    constituent models for merged ones. ``languages`` records every
    language whose training data contributed.
    """

    spec: ArchitectureSpec
    tensors: dict[str, np.ndarray]
    languages: tuple[str, ...]
    merge_count: int = 1
    seed: int | None = None

    def __post_init__(self):
        self.languages = tuple(sorted(set(self.languages)))
        if not self.languages:
            raise DataError("checkpoint metadata must name at least one language")
        if self.merge_count < 1:
            raise DataError(f"merge_count must be >= 1, got {self.merge_count}")
        expected = parameter_shapes(self.spec)
        if set(self.tensors) != set(expected):
            diff = sorted(set(self.tensors) ^ set(expected))
            raise DataError(f"checkpoint tensors do not match the spec; "
                            f"offending names: {diff[:5]}")
        for name, shape in expected.items():
            if tuple(self.tensors[name].shape) != shape:
                raise DataError(
                    f"tensor {name}: expected shape {shape}, "
                    f"got {tuple(self.tensors[name].shape)}"
                )

    @property
    def arch_hash(self) -> str:
        return self.spec.arch_hash

    def tensor_names(self) -> list[str]:
        return sorted(self.tensors)


def network_from_checkpoint(ckpt: Checkpoint, dtype=np.float32) -> Network:
    net = instantiate(ckpt.spec, dtype=dtype)
    net.load_state(ckpt.tensors)
    return net


def predict(ckpt: Checkpoint, vectors, network: Network | None = None):
    """Class probabilities and the predicted label for one sample.

    ``vectors`` is a single embedding vector, or a pair for fusion
    models. Ties at 0.5 resolve to class 0 (non-abusive). Passing a
    prebuilt ``network`` skips re-instantiation; its architecture hash
    must match the checkpoint.
    """
    if isinstance(vectors, np.ndarray) and vectors.ndim == 1:
        vectors = [vectors]
    vectors = [np.asarray(v) for v in vectors]
    dims = ckpt.spec.input_dims()
    if len(vectors) != len(dims):
        raise DataError(
            f"model takes {len(dims)} input vector(s), got {len(vectors)}"
        )
    for i, (v, d) in enumerate(zip(vectors, dims)):
        if v.ndim != 1 or v.shape[0] != d:
            raise DataError(
                f"input {i}: expected a {d}-dimensional vector, got shape {v.shape}"
            )
    if network is None:
        network = network_from_checkpoint(ckpt)
    if network.arch_hash != ckpt.arch_hash:
        raise IncompatibleArchitectureError(
            f"network hash {network.arch_hash} does not match checkpoint "
            f"hash {ckpt.arch_hash}"
        )
    logits = network.forward([v[None, :] for v in vectors], training=False)
    probs = softmax(logits.astype(np.float64), axis=-1)[0]
    label = 0 if probs[0] >= probs[1] else 1
    return probs, label
