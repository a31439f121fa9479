"""Shared plumbing for the two binary file formats (AEMB, ACKP).

Both formats are: 4-byte magic, u8 version, u32 LE header length, a
canonical-JSON header, then format-specific records. Canonical JSON
(sorted keys, no whitespace) makes re-serialization byte-identical.
"""

from __future__ import annotations

import json

import numpy as np

from collm.errors import FormatError

MAX_HEADER = 1 << 20


def canonical_json_bytes(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False).encode("utf-8")


class Cursor:
    """Byte reader that reports the offset of the first failure."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(
                f"truncated file: needed {n} byte(s) for {what}, "
                f"{len(self.data) - self.pos} left", offset=self.pos,
            )
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u8(self, what: str) -> int:
        return self.take(1, what)[0]

    def u16(self, what: str) -> int:
        return int(np.frombuffer(self.take(2, what), dtype="<u2")[0])

    def u32(self, what: str) -> int:
        return int(np.frombuffer(self.take(4, what), dtype="<u4")[0])

    def expect_eof(self) -> None:
        if self.pos != len(self.data):
            raise FormatError(
                f"{len(self.data) - self.pos} trailing byte(s) after the last record",
                offset=self.pos,
            )


def read_header(cur: Cursor, magic: bytes, version: int) -> dict:
    got = cur.take(4, "magic")
    if got != magic:
        raise FormatError(f"bad magic {got!r}, expected {magic!r}", offset=0)
    ver = cur.u8("version")
    if ver != version:
        raise FormatError(f"unsupported version {ver}, expected {version}", offset=4)
    hlen = cur.u32("header length")
    if hlen > MAX_HEADER:
        raise FormatError(f"header length {hlen} is implausible", offset=5)
    hstart = cur.pos
    hbytes = cur.take(hlen, "header")
    try:
        header = json.loads(hbytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"header is not valid JSON: {exc}", offset=hstart) from exc
    if not isinstance(header, dict):
        raise FormatError("header must be a JSON object", offset=hstart)
    return header
