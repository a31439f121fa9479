"""Training-free model merging by L1-normalized weight averaging.

Each per-language model's weights are first divided by their L1 norm so
magnitudes align across languages, then the normalized weights are
averaged into one unified model with the same parameter count. Merging
is incremental-friendly: a new language model can be folded into an
existing merged model without revisiting the originals (plug-in mode).

Normalization granularity is configurable because "the weights" can be
read three ways: per named tensor (default), per layer (each layer's
tensors share one joint norm), or one norm for the whole model. Pure
normalization shrinks every activation scale, which can collapse deep
ReLU classifiers toward their bias terms; ``rescale="mean_norm"``
restores each group to the mean of the input models' original norms.
All accumulation happens in f64, in a canonical input order, so any
permutation of the inputs yields identical results.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from collm.ackp import checkpoint_content_id
from collm.errors import (
    ConfigError,
    DegenerateWeightsError,
    IncompatibleArchitectureError,
    UsageError,
)
from collm.models import Checkpoint

GRANULARITIES = ("per_tensor", "per_layer", "whole_model")
RESCALES = ("none", "mean_norm")


@dataclass(frozen=True)
class MergeConfig:
    """How to normalize and recombine checkpoints.

    ``compat_sum`` replaces the mean by a plain sum of normalized
    weights; off by default, present only for comparison studies.
    """

    granularity: str = "per_tensor"
    rescale: str = "none"
    compat_sum: bool = False

    def __post_init__(self):
        if self.granularity not in GRANULARITIES:
            raise ConfigError(
                f"granularity must be one of {GRANULARITIES}, got {self.granularity!r}"
            )
        if self.rescale not in RESCALES:
            raise ConfigError(
                f"rescale must be one of {RESCALES}, got {self.rescale!r}"
            )


@dataclass
class MergeReport:
    """What went into a merge: inputs, their norms, and the config."""

    input_ids: list[str]
    input_languages: list[list[str]]
    input_merge_counts: list[int]
    original_norms: dict[str, list[float]]  # group key -> norm per input
    merge_count: int
    config: MergeConfig

    def to_dict(self) -> dict:
        return {
            "inputs": [
                {"id": i, "languages": langs, "merge_count": c}
                for i, langs, c in zip(
                    self.input_ids, self.input_languages, self.input_merge_counts
                )
            ],
            "original_l1_norms": self.original_norms,
            "merge_count": self.merge_count,
            "config": {
                "granularity": self.config.granularity,
                "rescale": self.config.rescale,
                "compat_sum": self.config.compat_sum,
            },
        }


def group_key(tensor_name: str, granularity: str) -> str:
    """Normalization group of a tensor: itself, its layer, or the model."""
    if granularity == "per_tensor":
        return tensor_name
    if granularity == "per_layer":
        return tensor_name.rsplit(".", 1)[0]
    return "<model>"


def group_norms(tensors: dict[str, np.ndarray], granularity: str) -> dict[str, float]:
    """L1 norm (sum of absolute values, f64) of every normalization group."""
    norms: dict[str, float] = {}
    for name in sorted(tensors):
        key = group_key(name, granularity)
        norms[key] = norms.get(key, 0.0) + float(
            np.abs(tensors[name].astype(np.float64)).sum()
        )
    return norms


def _normalized_tensors(ckpt: Checkpoint, cfg: MergeConfig) -> dict[str, np.ndarray]:
    norms = group_norms(ckpt.tensors, cfg.granularity)
    for key, norm in norms.items():
        if not np.isfinite(norm) or norm <= 0.0:
            raise DegenerateWeightsError(
                f"normalization group {key!r} has L1 norm {norm}"
            )
    return {
        name: t.astype(np.float64) / norms[group_key(name, cfg.granularity)]
        for name, t in ckpt.tensors.items()
    }


def l1_normalize(ckpt: Checkpoint, cfg: MergeConfig = MergeConfig()) -> Checkpoint:
    """Divide every normalization group by its L1 norm; metadata is kept."""
    return Checkpoint(
        spec=ckpt.spec,
        tensors=_normalized_tensors(ckpt, cfg),
        languages=ckpt.languages,
        merge_count=ckpt.merge_count,
        seed=ckpt.seed,
    )


def _contribution(ckpt: Checkpoint, cfg: MergeConfig) -> dict[str, np.ndarray]:
    """A checkpoint's summed-normalized-weights contribution, f64.

    A fresh model (merge_count 1) contributes its normalized weights. An
    already-merged model stores the mean of its constituents' normalized
    weights, so scaled by its count it contributes their sum.
    """
    if ckpt.merge_count == 1:
        return _normalized_tensors(ckpt, cfg)
    return {name: t.astype(np.float64) for name, t in ckpt.tensors.items()}


def _check_hashes(ckpts) -> None:
    hashes = {c.arch_hash for c in ckpts}
    if len(hashes) > 1:
        raise IncompatibleArchitectureError(
            "checkpoints do not share one architecture; hashes: "
            + ", ".join(sorted(hashes))
        )


def collm_merge(
    ckpts: list[Checkpoint], cfg: MergeConfig = MergeConfig()
) -> tuple[Checkpoint, MergeReport]:
    """Merge per-language checkpoints into one unified model.

    Inputs are normalized (fresh models) or expanded back to sums
    (already-merged models), accumulated in f64 in canonical order
    (sorted by content id), and divided by the total constituent count.
    """
    if not ckpts:
        raise UsageError("merge requires at least one checkpoint")
    _check_hashes(ckpts)
    order = sorted(range(len(ckpts)), key=lambda i: checkpoint_content_id(ckpts[i]))
    total = 0
    acc: dict[str, np.ndarray] = {}
    report_norms: dict[str, list[float]] = {}
    ids, langs, counts = [], [], []
    for i in order:
        ckpt = ckpts[i]
        ids.append(checkpoint_content_id(ckpt))
        langs.append(list(ckpt.languages))
        counts.append(ckpt.merge_count)
        for key, norm in group_norms(ckpt.tensors, cfg.granularity).items():
            report_norms.setdefault(key, []).append(norm)
        contrib = _contribution(ckpt, cfg)
        weight = float(ckpt.merge_count)
        for name, t in contrib.items():
            if name in acc:
                acc[name] += weight * t
            else:
                acc[name] = weight * t
        total += ckpt.merge_count
    if not cfg.compat_sum:
        for name in acc:
            acc[name] /= total
    if cfg.rescale == "mean_norm":
        for name in acc:
            key = group_key(name, cfg.granularity)
            acc[name] *= float(np.mean(report_norms[key]))
    merged = Checkpoint(
        spec=ckpts[0].spec,
        tensors=acc,
        languages=tuple(sorted(set().union(*(c.languages for c in ckpts)))),
        merge_count=total,
        seed=None,
    )
    report = MergeReport(
        input_ids=ids, input_languages=langs, input_merge_counts=counts,
        original_norms=report_norms, merge_count=total, config=cfg,
    )
    return merged, report


def plugin_merge(
    base: Checkpoint, incoming: Checkpoint, cfg: MergeConfig = MergeConfig()
) -> Checkpoint:
    """Fold a newly trained model into an existing merged model.

    With base count n and incoming count m the result is
    (n * base + m * incoming-contribution) / (n + m), which makes a chain
    of plug-ins equal to one batch merge of all constituents.
    """
    if cfg.rescale != "none":
        raise ConfigError(
            "plug-in merging supports rescale='none' only: a merged base "
            "does not carry its inputs' original norms"
        )
    _check_hashes([base, incoming])
    n, m = base.merge_count, incoming.merge_count
    base_sum = {
        name: t.astype(np.float64) * n for name, t in base.tensors.items()
    }
    contrib = _contribution(incoming, cfg)
    tensors = {
        name: (base_sum[name] + m * contrib[name]) / (n + m) for name in base_sum
    }
    return Checkpoint(
        spec=base.spec,
        tensors=tensors,
        languages=tuple(sorted(set(base.languages) | set(incoming.languages))),
        merge_count=n + m,
        seed=None,
    )
