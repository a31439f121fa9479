"""Checkpoint wire format: round trips, truncation, corruption."""

import numpy as np
import pytest

from collm.ackp import (
    checkpoint_content_id,
    checkpoint_from_bytes,
    checkpoint_to_bytes,
    read_checkpoint,
    write_checkpoint,
)
from collm.errors import FormatError

from conftest import random_checkpoint, tiny_spec


class TestAckpFormat:
    def test_round_trip_bit_exact(self, tmp_path, small_ckpt):
        path = tmp_path / "m.ackp"
        write_checkpoint(small_ckpt, path)
        first = path.read_bytes()
        again = read_checkpoint(path)
        write_checkpoint(again, path)
        assert path.read_bytes() == first
        assert again.languages == small_ckpt.languages
        assert again.merge_count == small_ckpt.merge_count
        assert again.seed == small_ckpt.seed
        for name, t in small_ckpt.tensors.items():
            assert np.array_equal(again.tensors[name], t)

    def test_truncation_every_byte_is_clean(self, small_ckpt):
        blob = checkpoint_to_bytes(small_ckpt)
        for cut in range(len(blob)):
            with pytest.raises(FormatError):
                checkpoint_from_bytes(blob[:cut])

    def test_trailing_bytes_rejected(self, small_ckpt):
        blob = checkpoint_to_bytes(small_ckpt)
        with pytest.raises(FormatError, match="trailing"):
            checkpoint_from_bytes(blob + b"x")

    def test_declared_hash_must_match_spec(self, small_ckpt):
        blob = checkpoint_to_bytes(small_ckpt)
        mangled = blob.replace(small_ckpt.arch_hash.encode(),
                               ("0" * 64).encode(), 1)
        with pytest.raises(FormatError, match="arch_hash"):
            checkpoint_from_bytes(mangled)

    def test_merged_f64_tensors_serialize_as_f32(self, tmp_path, small_ckpt):
        from collm.merge import collm_merge

        merged, _ = collm_merge([small_ckpt])
        assert merged.tensors["head.bias"].dtype == np.float64
        path = tmp_path / "merged.ackp"
        write_checkpoint(merged, path)
        loaded = read_checkpoint(path)
        assert loaded.tensors["head.bias"].dtype == np.float32
        # f32 storage quantization only
        for name in merged.tensors:
            a = merged.tensors[name].astype(np.float64)
            b = loaded.tensors[name].astype(np.float64)
            assert np.abs(a - b).max() < 1e-6

    def test_content_id_stable_across_round_trip(self, tmp_path, small_ckpt):
        path = tmp_path / "m.ackp"
        write_checkpoint(small_ckpt, path)
        assert checkpoint_content_id(read_checkpoint(path)) == \
            checkpoint_content_id(small_ckpt)

    def test_content_id_differs_for_different_weights(self):
        a = random_checkpoint(tiny_spec(), 1)
        b = random_checkpoint(tiny_spec(), 2)
        assert checkpoint_content_id(a) != checkpoint_content_id(b)
