"""Batch extraction: labeled audio directory -> one AEMB file."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

from aad_extractor import aemb
from aad_extractor.audio import AudioDecodeError, load_clip
from aad_extractor.backends import get_backend
from aad_extractor.ptms import PTM_DIMS


class UsageError(Exception):
    pass


class ExtractionError(Exception):
    pass


@dataclass
class ExtractJob:
    audio_dir: str
    labels_csv: str
    ptm: str
    out_path: str
    language: str = "unknown"
    backend: str = "pretrained"

    def __post_init__(self):
        if self.ptm not in PTM_DIMS:
            raise UsageError(
                f"unknown extractor {self.ptm!r}; known: {sorted(PTM_DIMS)}"
            )


def _read_labels(path) -> list[dict]:
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"labels file {path} does not exist")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"id", "relative_path", "label"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise UsageError(
                f"labels file must have columns id,relative_path,label; "
                f"got {reader.fieldnames}"
            )
        rows = list(reader)
    if not rows:
        raise UsageError(f"labels file {path} has no rows")
    return rows


def run_extract(job: ExtractJob) -> dict:
    """Extract every labeled clip; returns a summary dict.

    Undecodable clips are skipped with a warning and listed in a sidecar
    report next to the output file. A vector of the wrong dimension is a
    hard error (it means the backend and the extractor table disagree).
    """
    audio_dir = Path(job.audio_dir)
    if not audio_dir.is_dir():
        raise UsageError(f"audio directory {audio_dir} does not exist")
    rows = _read_labels(job.labels_csv)
    embed = get_backend(job.backend, job.ptm)
    dim = PTM_DIMS[job.ptm]
    records = []
    skipped = []
    for row in rows:
        clip_id, rel, label_text = row["id"], row["relative_path"], row["label"]
        if label_text not in ("0", "1"):
            raise ExtractionError(
                f"clip {clip_id!r}: label must be 0 or 1, got {label_text!r}"
            )
        clip_path = audio_dir / rel
        try:
            samples = load_clip(clip_path)
        except AudioDecodeError as exc:
            print(f"warning: skipping {clip_id}: {exc}")
            skipped.append({"id": clip_id, "path": str(clip_path), "reason": str(exc)})
            continue
        vector = embed(samples)
        if vector.shape != (dim,):
            raise ExtractionError(
                f"backend produced shape {vector.shape} for {job.ptm!r}, "
                f"expected ({dim},)"
            )
        records.append((clip_id, int(label_text), vector))
    if not records:
        raise ExtractionError("no clip could be decoded; nothing to write")
    aemb.write(job.out_path, job.language, job.ptm, records, dim)
    if skipped:
        sidecar = Path(f"{job.out_path}.skipped.json")
        sidecar.write_text(json.dumps({"skipped": skipped}, indent=2) + "\n")
    return {"written": len(records), "skipped": len(skipped),
            "dim": dim, "out": str(job.out_path)}
