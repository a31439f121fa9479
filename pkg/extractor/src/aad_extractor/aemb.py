"""Independent writer for the AEMB embedding-file format.

Layout: magic ``AEMB``, version u8=1, u32 LE header length, canonical
JSON header {count, dim, label_names, language, ptm}, then per record a
u16 LE id length, the UTF-8 id, a u8 label, and dim little-endian f32
values. Written bytes must parse cleanly with the ``collm`` reader; the
smoke tests enforce that.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

MAGIC = b"AEMB"
VERSION = 1
LABEL_NAMES = ["non_abusive", "abusive"]


def encode(language: str, ptm: str, records: list[tuple[str, int, np.ndarray]],
           dim: int) -> bytes:
    header = {
        "count": len(records),
        "dim": dim,
        "label_names": LABEL_NAMES,
        "language": language,
        "ptm": ptm,
    }
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":"),
                        ensure_ascii=False).encode("utf-8")
    parts = [MAGIC, bytes([VERSION]), np.uint32(len(hbytes)).tobytes(), hbytes]
    for clip_id, label, vector in records:
        if vector.shape != (dim,):
            raise ValueError(f"{clip_id}: vector shape {vector.shape}, expected ({dim},)")
        if label not in (0, 1):
            raise ValueError(f"{clip_id}: label {label} is not 0 or 1")
        idb = clip_id.encode("utf-8")
        parts.append(np.uint16(len(idb)).tobytes())
        parts.append(idb)
        parts.append(bytes([label]))
        parts.append(vector.astype("<f4").tobytes())
    return b"".join(parts)


def write(path, language: str, ptm: str,
          records: list[tuple[str, int, np.ndarray]], dim: int) -> None:
    path = Path(path)
    tmp = path.with_name(f"{path.name}.tmp{os.getpid()}")
    tmp.write_bytes(encode(language, ptm, records, dim))
    tmp.replace(path)
