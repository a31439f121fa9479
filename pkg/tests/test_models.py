"""Architecture builders, spec hashing, checkpoints, and predict."""

import numpy as np
import pytest

from collm.errors import ConfigError, DataError, IncompatibleArchitectureError
from collm.models import (
    ArchitectureSpec,
    Checkpoint,
    PtmInfo,
    build_cnn,
    build_fusion,
    build_transformer,
    instantiate,
    network_from_checkpoint,
    parameter_shapes,
    predict,
)
from collm.nn.functional import softmax

from conftest import random_checkpoint, tiny_spec


def shape_walk(dim, channels=(32, 64), kernel=3, window=2, stride=2):
    """Independent oracle for the conv block's output length."""
    length = dim
    for _ in channels:
        length = length - kernel + 1
        length = (length - window) // stride + 1
    return length


class TestBuilders:
    def test_cnn_flatten_width_dim_1024(self):
        spec = build_cnn(1024, ptm="trillsson")
        flatten = next(e for e in spec.layers if e["kind"] == "flatten")
        assert flatten["width"] == 64 * shape_walk(1024)
        net = instantiate(spec, init_rng=3)
        x = np.random.default_rng(0).standard_normal((1, 1024)).astype(np.float32)
        probs = softmax(net.forward([x]), axis=-1)
        assert abs(probs.sum() - 1.0) < 1e-6

    def test_hash_differs_across_dims(self):
        assert build_cnn(1024).arch_hash != build_cnn(512).arch_hash

    def test_hash_sensitive_to_hyperparameters(self):
        base = build_cnn(64)
        assert base.arch_hash != build_cnn(64, fcn_widths=(256, 90, 57)).arch_hash
        assert base.arch_hash != build_cnn(64, kernel=5).arch_hash
        assert base.arch_hash != build_transformer(64).arch_hash

    def test_hash_stable_under_reserialization(self):
        spec = build_transformer(64)
        again = ArchitectureSpec.from_dict(spec.to_dict())
        assert again.arch_hash == spec.arch_hash
        assert again.canonical_json() == spec.canonical_json()

    def test_small_dim_rejected(self):
        with pytest.raises(ConfigError):
            build_cnn(8)

    def test_transformer_head_divisibility(self):
        spec = build_transformer(64)
        attn = next(e for e in spec.layers if e["kind"] == "multihead_attention")
        assert attn["d_model"] % attn["heads"] == 0
        assert attn["d_model"] // attn["heads"] == 8

    def test_transformer_output_is_distribution(self):
        net = instantiate(build_transformer(64, ptm="synthetic"), init_rng=1)
        x = np.random.default_rng(5).standard_normal((3, 64)).astype(np.float32)
        probs = softmax(net.forward([x]), axis=-1)
        assert np.abs(probs.sum(axis=1) - 1.0).max() < 1e-6

    def test_encoder_block_preserves_shape(self):
        from collm.nn.layers import EncoderBlock

        block = EncoderBlock("e", 64, 8, 128)
        block.init_params(np.random.default_rng(0), np.float64)
        x = np.random.default_rng(1).standard_normal((2, 14, 64))
        assert block.forward(x).shape == x.shape


class TestFusion:
    def test_same_source_rejected(self):
        t = PtmInfo.of("trillsson")
        with pytest.raises(ConfigError):
            build_fusion(t, t, "conv")

    def test_mixed_block_kind_rejected(self):
        with pytest.raises(ConfigError):
            build_fusion(PtmInfo.of("whisper"), PtmInfo.of("trillsson"), "lstm")

    def test_concatenated_width(self):
        spec = build_fusion(PtmInfo.of("whisper"), PtmInfo.of("trillsson"), "conv")
        widths = [e["width"] for e in spec.layers if e["kind"] == "flatten"]
        fc1 = next(e for e in spec.layers if e["name"] == "fcn.fc1")
        assert fc1["in_features"] == sum(widths)
        assert widths == [64 * shape_walk(512), 64 * shape_walk(1024)]

    def test_fusion_equals_composed_streams(self):
        """Compositional oracle: run each stream alone, concatenate, and
        push through the tail with the same weights."""
        spec = build_fusion(PtmInfo("emb_a", 32), PtmInfo("emb_b", 48), "conv")
        net = instantiate(spec, dtype=np.float64, init_rng=11)
        rng = np.random.default_rng(2)
        xa = rng.standard_normal((3, 32))
        xb = rng.standard_normal((3, 48))
        got = net.forward([xa, xb])

        feats = []
        for x, stream in ((xa, net.streams[0]), (xb, net.streams[1])):
            h = x[:, None, :]
            for layer in stream:
                h = layer.forward(h)
            feats.append(h)
        h = np.concatenate(feats, axis=1)
        for layer in net.tail:
            h = layer.forward(h)
        assert np.abs(got - h).max() < 1e-10


class TestCheckpoint:
    def test_tensor_names_match_network_params(self):
        spec = build_transformer(64, ptm="synthetic")
        net = instantiate(spec, init_rng=0)
        assert set(net.params()) == set(parameter_shapes(spec))

    def test_shape_mismatch_rejected(self):
        spec = tiny_spec()
        tensors = {name: np.zeros(shape, dtype=np.float32)
                   for name, shape in parameter_shapes(spec).items()}
        tensors["head.bias"] = np.zeros(3, dtype=np.float32)
        with pytest.raises(DataError):
            Checkpoint(spec=spec, tensors=tensors, languages=("x",))

    def test_missing_tensor_rejected(self):
        spec = tiny_spec()
        tensors = {name: np.zeros(shape, dtype=np.float32)
                   for name, shape in parameter_shapes(spec).items()}
        del tensors["head.weight"]
        with pytest.raises(DataError):
            Checkpoint(spec=spec, tensors=tensors, languages=("x",))

    def test_hash_blind_to_metadata(self):
        a = random_checkpoint(tiny_spec(), 1, languages=("hi",))
        b = random_checkpoint(tiny_spec(), 2, languages=("ta", "bn"))
        assert a.arch_hash == b.arch_hash


class TestPredict:
    def test_zero_weights_tie_break_to_class_zero(self):
        spec = build_cnn(16, ptm="synthetic")
        tensors = {name: np.zeros(shape, dtype=np.float32)
                   for name, shape in parameter_shapes(spec).items()}
        ckpt = Checkpoint(spec=spec, tensors=tensors, languages=("z",))
        probs, label = predict(ckpt, np.ones(16, dtype=np.float32))
        assert np.allclose(probs, [0.5, 0.5])
        assert label == 0

    def test_deterministic_and_pure(self):
        ckpt = _trained_like_checkpoint()
        x = np.random.default_rng(3).standard_normal(16).astype(np.float32)
        p1, l1 = predict(ckpt, x)
        p2, l2 = predict(ckpt, x)
        assert np.array_equal(p1, p2) and l1 == l2

    def test_probabilities_sum_to_one(self):
        ckpt = _trained_like_checkpoint()
        rng = np.random.default_rng(8)
        net = network_from_checkpoint(ckpt)
        for _ in range(100):
            probs, _ = predict(ckpt, rng.standard_normal(16).astype(np.float32),
                               network=net)
            assert abs(probs.sum() - 1.0) < 1e-6
            assert probs.min() > 0.0

    def test_dimension_mismatch(self):
        ckpt = _trained_like_checkpoint()
        with pytest.raises(DataError):
            predict(ckpt, np.zeros(17, dtype=np.float32))

    def test_network_hash_guard(self):
        ckpt = _trained_like_checkpoint()
        other = instantiate(build_cnn(32, ptm="synthetic"), init_rng=0)
        with pytest.raises(IncompatibleArchitectureError):
            predict(ckpt, np.zeros(16, dtype=np.float32), network=other)


def _trained_like_checkpoint():
    spec = build_cnn(16, ptm="synthetic")
    net = instantiate(spec, init_rng=4)
    tensors = {k: v.astype(np.float32) for k, v in net.params().items()}
    return Checkpoint(spec=spec, tensors=tensors, languages=("lang0",))


def test_ptm_dims_fixed():
    assert PtmInfo.of("trillsson").dim == 1024
    assert PtmInfo.of("mms").dim == 1280
    assert PtmInfo.of("whisper").dim == 512
    assert PtmInfo.of("wavlm_or_unispeechsat").dim == 768
    assert PtmInfo.of("xvector").dim == 512
    with pytest.raises(ConfigError):
        PtmInfo("trillsson", 512)
