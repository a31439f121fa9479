"""Labeled embedding datasets and their on-disk format.

One AEMB file holds the embeddings of one (language, extractor) pair:

    magic ``AEMB`` | version u8=1 | u32 LE header length |
    canonical-JSON header {count, dim, label_names, language, ptm} |
    ``count`` records, each: u16 LE id length, UTF-8 id, u8 label,
    ``dim`` little-endian f32 values.

The header JSON is canonical (sorted keys, no whitespace), so
write -> read -> write is byte-identical. Readers fail with the byte
offset of the first problem and never crash on truncated input.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from collm.errors import DataError, FormatError
from collm.ioutil import atomic_write_bytes
from collm.models import PTM_DIMS
from collm.wire import Cursor, canonical_json_bytes, read_header

MAGIC = b"AEMB"
VERSION = 1
LABEL_NAMES = ["non_abusive", "abusive"]


@dataclass
class EmbeddingDataset:
    """Fixed-dimension embedding vectors with binary labels.

    ``vectors`` is (N, dim) float32; ``labels`` holds 0 (non-abusive) or
    1 (abusive); ``ids`` are unique within the dataset.
    """

    language: str
    ptm: str
    ids: tuple[str, ...]
    labels: np.ndarray
    vectors: np.ndarray

    def __post_init__(self):
        self.ids = tuple(str(i) for i in self.ids)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.vectors = np.ascontiguousarray(np.asarray(self.vectors, dtype=np.float32))
        n = len(self.ids)
        if self.vectors.ndim != 2 or self.vectors.shape[0] != n or len(self.labels) != n:
            raise DataError(
                f"inconsistent dataset: {n} ids, {len(self.labels)} labels, "
                f"vectors {self.vectors.shape}"
            )
        if self.dim < 1:
            raise DataError("embedding dimension must be positive")
        known = PTM_DIMS.get(self.ptm)
        if known is not None and known != self.dim:
            raise DataError(
                f"{self.ptm} embeddings are {known}-dimensional, "
                f"this dataset has dim {self.dim}"
            )
        if len(set(self.ids)) != n:
            seen, dup = set(), None
            for i in self.ids:
                if i in seen:
                    dup = i
                    break
                seen.add(i)
            raise DataError(f"duplicate sample id {dup!r}")
        bad = (self.labels < 0) | (self.labels > 1)
        if bad.any():
            raise DataError(
                f"labels must be 0 or 1; id {self.ids[int(np.argmax(bad))]!r} "
                f"has label {int(self.labels[bad][0])}"
            )

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        return len(self.ids)

    def records(self):
        for i, sample_id in enumerate(self.ids):
            yield sample_id, int(self.labels[i]), self.vectors[i]


@dataclass
class PairedDataset:
    """Two embedding views of the same utterances, aligned by id."""

    language: str
    ptms: tuple[str, str]
    ids: tuple[str, ...]
    labels: np.ndarray
    vectors_a: np.ndarray
    vectors_b: np.ndarray

    @property
    def dims(self) -> tuple[int, int]:
        return int(self.vectors_a.shape[1]), int(self.vectors_b.shape[1])

    def __len__(self) -> int:
        return len(self.ids)


def dataset_to_bytes(ds: EmbeddingDataset) -> bytes:
    header = {
        "count": len(ds),
        "dim": ds.dim,
        "label_names": LABEL_NAMES,
        "language": ds.language,
        "ptm": ds.ptm,
    }
    hbytes = canonical_json_bytes(header)
    parts = [MAGIC, bytes([VERSION]),
             np.uint32(len(hbytes)).tobytes(), hbytes]
    for sample_id, label, vec in ds.records():
        idb = sample_id.encode("utf-8")
        if len(idb) > 0xFFFF:
            raise DataError(f"sample id too long ({len(idb)} bytes)")
        parts.append(np.uint16(len(idb)).tobytes())
        parts.append(idb)
        parts.append(bytes([label]))
        parts.append(vec.astype("<f4").tobytes())
    return b"".join(parts)


def write_embeddings(ds: EmbeddingDataset, path) -> None:
    atomic_write_bytes(path, dataset_to_bytes(ds))


def dataset_from_bytes(data: bytes) -> EmbeddingDataset:
    cur = Cursor(data)
    header = read_header(cur, MAGIC, VERSION)
    for key in ("count", "dim", "label_names", "language", "ptm"):
        if key not in header:
            raise FormatError(f"header is missing {key!r}", offset=9)
    if header["label_names"] != LABEL_NAMES:
        raise FormatError(
            f"unexpected label names {header['label_names']!r}", offset=9
        )
    count, dim = header["count"], header["dim"]
    if not isinstance(count, int) or count < 0:
        raise FormatError(f"invalid record count {count!r}", offset=9)
    if not isinstance(dim, int) or dim < 1:
        raise FormatError(f"invalid dimension {dim!r}", offset=9)
    ids: list[str] = []
    seen: set[str] = set()
    labels = np.empty(count, dtype=np.int64)
    vectors = np.empty((count, dim), dtype=np.float32)
    for i in range(count):
        rec_at = cur.pos
        idlen = cur.u16(f"id length of record {i}")
        try:
            sample_id = cur.take(idlen, f"id of record {i}").decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"record {i} id is not UTF-8", offset=rec_at + 2) from exc
        if sample_id in seen:
            raise FormatError(f"duplicate sample id {sample_id!r}", offset=rec_at)
        seen.add(sample_id)
        label = cur.u8(f"label of record {i}")
        if label > 1:
            raise FormatError(
                f"record {i} ({sample_id!r}) has label {label}, expected 0 or 1",
                offset=cur.pos - 1,
            )
        vec = np.frombuffer(cur.take(4 * dim, f"vector of record {i}"), dtype="<f4")
        ids.append(sample_id)
        labels[i] = label
        vectors[i] = vec
    cur.expect_eof()
    return EmbeddingDataset(
        language=header["language"], ptm=header["ptm"],
        ids=tuple(ids), labels=labels, vectors=vectors,
    )


def read_embeddings(path) -> EmbeddingDataset:
    return dataset_from_bytes(Path(path).read_bytes())


@dataclass
class SplitManifest:
    """Train/test partition of one language's data, as file paths."""

    language: str
    train_path: str
    test_path: str

    @classmethod
    def load(cls, path) -> "SplitManifest":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise FormatError(f"cannot parse manifest {path}: {exc}") from exc
        try:
            manifest = cls(language=raw["language"], train_path=raw["train_path"],
                           test_path=raw["test_path"])
        except (KeyError, TypeError) as exc:
            raise FormatError(f"manifest {path} is missing {exc}") from exc
        return manifest

    def save(self, path) -> None:
        payload = {"language": self.language, "train_path": self.train_path,
                   "test_path": self.test_path}
        atomic_write_bytes(path, (json.dumps(payload, indent=2) + "\n").encode())

    def load_datasets(self, base_dir=None) -> tuple[EmbeddingDataset, EmbeddingDataset]:
        """Read both partitions and enforce that they do not overlap."""
        base = Path(base_dir) if base_dir is not None else Path(".")
        train = read_embeddings(base / self.train_path)
        test = read_embeddings(base / self.test_path)
        overlap = set(train.ids) & set(test.ids)
        if overlap:
            raise DataError(
                f"train and test partitions overlap, e.g. {sorted(overlap)[:3]}"
            )
        return train, test


def stratified_split(labels: np.ndarray, fraction: float, rng) -> tuple[np.ndarray, np.ndarray]:
    """Split indices into (rest, held_out) preserving the class ratio.

    The held-out share of each class is rounded to the nearest sample,
    never taking a class entirely.
    """
    if not (0.0 <= fraction < 0.5):
        raise DataError(f"held-out fraction must be in [0, 0.5), got {fraction}")
    labels = np.asarray(labels)
    held, rest = [], []
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        idx = idx[rng.permutation(len(idx))]
        take = min(int(round(fraction * len(idx))), len(idx) - 1)
        held.append(idx[:take])
        rest.append(idx[take:])
    rest = np.sort(np.concatenate(rest))
    held = np.sort(np.concatenate(held)) if held else np.array([], dtype=np.int64)
    return rest, held


def join_for_fusion(a: EmbeddingDataset, b: EmbeddingDataset) -> PairedDataset:
    """Align two views of the same utterances by sample id.

    Both datasets must cover the same language and the same id set, and
    agree on every label.
    """
    if a.language != b.language:
        raise DataError(
            f"cannot pair languages {a.language!r} and {b.language!r}"
        )
    only_a = sorted(set(a.ids) - set(b.ids))
    only_b = sorted(set(b.ids) - set(a.ids))
    if only_a or only_b:
        raise DataError(
            f"id sets differ: {len(only_a)} only in first (e.g. {only_a[:3]}), "
            f"{len(only_b)} only in second (e.g. {only_b[:3]})"
        )
    pos_b = {sample_id: i for i, sample_id in enumerate(b.ids)}
    order = np.array([pos_b[sample_id] for sample_id in a.ids])
    mismatched = np.flatnonzero(a.labels != b.labels[order])
    if len(mismatched):
        first = a.ids[int(mismatched[0])]
        raise DataError(
            f"labels disagree on {len(mismatched)} id(s), first: {first!r}"
        )
    return PairedDataset(
        language=a.language, ptms=(a.ptm, b.ptm), ids=a.ids,
        labels=a.labels.copy(), vectors_a=a.vectors,
        vectors_b=b.vectors[order],
    )
