"""Checkpoint file format.

    magic ``ACKP`` | version u8=1 | u32 LE header length |
    canonical-JSON header {arch_hash, languages, merge_count, seed, spec} |
    per tensor, in lexicographic name order: u16 LE name length, UTF-8
    name, u8 ndim, ndim x u32 LE dims, little-endian f32 payload.

The tensor list is implied by the embedded spec, so a reader knows
exactly how many bytes to expect; anything shorter or longer is a
format error with a byte offset.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

from collm.errors import DataError, FormatError
from collm.ioutil import atomic_write_bytes
from collm.models import ArchitectureSpec, Checkpoint, parameter_shapes
from collm.wire import Cursor, canonical_json_bytes, read_header

MAGIC = b"ACKP"
VERSION = 1


def checkpoint_to_bytes(ckpt: Checkpoint) -> bytes:
    header = {
        "arch_hash": ckpt.arch_hash,
        "languages": list(ckpt.languages),
        "merge_count": ckpt.merge_count,
        "seed": ckpt.seed,
        "spec": ckpt.spec.to_dict(),
    }
    hbytes = canonical_json_bytes(header)
    parts = [MAGIC, bytes([VERSION]), np.uint32(len(hbytes)).tobytes(), hbytes]
    for name in sorted(ckpt.tensors):
        tensor = np.ascontiguousarray(ckpt.tensors[name], dtype="<f4")
        nb = name.encode("utf-8")
        parts.append(np.uint16(len(nb)).tobytes())
        parts.append(nb)
        parts.append(bytes([tensor.ndim]))
        parts.append(np.asarray(tensor.shape, dtype="<u4").tobytes())
        parts.append(tensor.tobytes())
    return b"".join(parts)


def write_checkpoint(ckpt: Checkpoint, path) -> None:
    atomic_write_bytes(path, checkpoint_to_bytes(ckpt))


def checkpoint_from_bytes(data: bytes) -> Checkpoint:
    cur = Cursor(data)
    header = read_header(cur, MAGIC, VERSION)
    for key in ("arch_hash", "languages", "merge_count", "seed", "spec"):
        if key not in header:
            raise FormatError(f"header is missing {key!r}", offset=9)
    try:
        spec = ArchitectureSpec.from_dict(header["spec"])
    except Exception as exc:
        raise FormatError(f"embedded spec is invalid: {exc}", offset=9) from exc
    if header["arch_hash"] != spec.arch_hash:
        raise FormatError(
            f"declared arch_hash {header['arch_hash']!r} does not match the "
            f"embedded spec ({spec.arch_hash})", offset=9,
        )
    expected = parameter_shapes(spec)
    tensors: dict[str, np.ndarray] = {}
    for name in sorted(expected):
        at = cur.pos
        nlen = cur.u16(f"name length of tensor {name!r}")
        try:
            got = cur.take(nlen, "tensor name").decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError("tensor name is not UTF-8", offset=at + 2) from exc
        if got != name:
            raise FormatError(
                f"tensor name {got!r} out of order, expected {name!r}", offset=at
            )
        ndim = cur.u8(f"rank of tensor {name!r}")
        dims = tuple(cur.u32(f"dim {i} of tensor {name!r}") for i in range(ndim))
        if dims != expected[name]:
            raise FormatError(
                f"tensor {name!r} has shape {dims}, spec requires {expected[name]}",
                offset=at,
            )
        size = int(np.prod(dims, dtype=np.int64)) if dims else 1
        payload = cur.take(4 * size, f"payload of tensor {name!r}")
        tensors[name] = np.frombuffer(payload, dtype="<f4").reshape(dims).copy()
    cur.expect_eof()
    try:
        return Checkpoint(
            spec=spec, tensors=tensors,
            languages=tuple(header["languages"]),
            merge_count=int(header["merge_count"]),
            seed=header["seed"],
        )
    except (DataError, TypeError, ValueError) as exc:
        raise FormatError(f"invalid checkpoint metadata: {exc}") from exc


def read_checkpoint(path) -> Checkpoint:
    return checkpoint_from_bytes(Path(path).read_bytes())


def checkpoint_content_id(ckpt: Checkpoint) -> str:
    """Stable identifier: SHA-256 over the serialized checkpoint bytes.

    Survives a save/load round trip, which makes it the canonical sort
    key when merging."""
    return hashlib.sha256(checkpoint_to_bytes(ckpt)).hexdigest()
