"""Synthetic multi-language embedding generator.

Desk-scale stand-in for real extracted embeddings: each language gets
two Gaussian classes with unit spherical noise. In ``shared`` mode all
languages share one global pair of class means (separated by the
configured distance) plus a per-language nuisance offset added to both
classes, so cross-language structure survives. In ``disjoint`` mode
every language draws its own independent class-mean pair, which
destroys cross-language transfer by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from collm.data import EmbeddingDataset
from collm.errors import ConfigError
from collm.rng import make_rng


@dataclass(frozen=True)
class SynthConfig:
    n_languages: int = 4
    dim: int = 64
    train_count: int = 480
    test_count: int = 120
    mode: str = "shared"
    separation: float = 6.0
    nuisance_scale: float = 1.0
    seed: int = 0
    ptm: str = "synthetic"

    def __post_init__(self):
        if self.n_languages < 1:
            raise ConfigError(f"need at least one language, got {self.n_languages}")
        if self.dim < 1:
            raise ConfigError(f"dimension must be positive, got {self.dim}")
        if self.train_count < 1 or self.test_count < 1:
            raise ConfigError("per-language train/test counts must be positive")
        if self.mode not in ("shared", "disjoint"):
            raise ConfigError(f"mode must be 'shared' or 'disjoint', got {self.mode!r}")
        if self.separation <= 0:
            raise ConfigError(f"class separation must be positive, got {self.separation}")
        if self.nuisance_scale < 0:
            raise ConfigError(f"nuisance scale must be >= 0, got {self.nuisance_scale}")


def _unit(rng, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def _draw_split(rng, lang: str, split: str, count: int, means: np.ndarray,
                cfg: SynthConfig) -> EmbeddingDataset:
    labels = np.zeros(count, dtype=np.int64)
    labels[count - count // 2:] = 1
    labels = labels[rng.permutation(count)]
    noise = rng.standard_normal((count, cfg.dim))
    vectors = means[labels] + noise
    ids = tuple(f"{lang}-{split}-{i:05d}" for i in range(count))
    return EmbeddingDataset(language=lang, ptm=cfg.ptm, ids=ids, labels=labels,
                            vectors=vectors.astype(np.float32))


def synth_generate(cfg: SynthConfig) -> dict[str, tuple[EmbeddingDataset, EmbeddingDataset]]:
    """Generate per-language (train, test) datasets, deterministic in the seed."""
    rng = make_rng(cfg.seed)
    half = cfg.separation / 2.0
    if cfg.mode == "shared":
        direction = _unit(rng, cfg.dim)
        base_means = np.stack([-half * direction, half * direction])
    out: dict[str, tuple[EmbeddingDataset, EmbeddingDataset]] = {}
    for li in range(cfg.n_languages):
        lang = f"lang{li}"
        if cfg.mode == "shared":
            offset = cfg.nuisance_scale * rng.standard_normal(cfg.dim)
            means = base_means + offset
        else:
            direction = _unit(rng, cfg.dim)
            center = cfg.nuisance_scale * rng.standard_normal(cfg.dim)
            means = np.stack([center - half * direction, center + half * direction])
        train = _draw_split(rng, lang, "train", cfg.train_count, means, cfg)
        test = _draw_split(rng, lang, "test", cfg.test_count, means, cfg)
        out[lang] = (train, test)
    return out
