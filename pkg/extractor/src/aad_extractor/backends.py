"""Embedding backends.

``pretrained`` runs the published checkpoints (needs their heavyweight
dependency stacks plus a one-time multi-gigabyte download). ``spectral``
is a deterministic, dependency-free stand-in: log filterbank statistics
pushed through a projection seeded by the extractor name. It produces
the right dimensionality and stable values for format and pipeline
work, but does not reproduce the published representations.
"""

from __future__ import annotations

import hashlib

import numpy as np

from aad_extractor.ptms import PRETRAINED_SOURCES, PTM_DIMS, TARGET_SAMPLE_RATE

_FRAME = 400        # 25 ms at 16 kHz
_HOP = 160          # 10 ms
_N_BANDS = 48


def spectral_embed(samples: np.ndarray, ptm: str) -> np.ndarray:
    """Mean and deviation of log triangular-band energies, projected to
    the extractor's dimension by a matrix seeded from its name."""
    dim = PTM_DIMS[ptm]
    bands = _filterbank_frames(samples)
    stats = np.concatenate([bands.mean(axis=0), bands.std(axis=0)])
    seed = int.from_bytes(hashlib.sha256(ptm.encode()).digest()[:8], "little")
    rng = np.random.Generator(np.random.PCG64(seed))
    projection = rng.standard_normal((dim, stats.size)) / np.sqrt(stats.size)
    return (projection @ stats).astype(np.float32)


def _filterbank_frames(samples: np.ndarray) -> np.ndarray:
    if len(samples) < _FRAME:
        samples = np.pad(samples, (0, _FRAME - len(samples)))
    n_frames = 1 + (len(samples) - _FRAME) // _HOP
    idx = np.arange(_FRAME)[None, :] + _HOP * np.arange(n_frames)[:, None]
    frames = samples[idx] * np.hanning(_FRAME)
    power = np.abs(np.fft.rfft(frames, axis=1)) ** 2
    freqs = np.fft.rfftfreq(_FRAME, 1.0 / TARGET_SAMPLE_RATE)
    edges = np.linspace(0.0, TARGET_SAMPLE_RATE / 2, _N_BANDS + 2)
    bank = np.zeros((_N_BANDS, len(freqs)))
    for b in range(_N_BANDS):
        lo, mid, hi = edges[b], edges[b + 1], edges[b + 2]
        up = (freqs - lo) / (mid - lo)
        down = (hi - freqs) / (hi - mid)
        bank[b] = np.clip(np.minimum(up, down), 0.0, None)
    return np.log(power @ bank.T + 1e-10)


class PretrainedBackend:
    """Wraps one published checkpoint; imports its stack lazily."""

    def __init__(self, ptm: str):
        self.ptm = ptm
        self.dim = PTM_DIMS[ptm]
        self._model = None

    def _load(self):
        source = PRETRAINED_SOURCES[self.ptm]
        if self.ptm in ("mms", "wavlm_or_unispeechsat"):
            from transformers import AutoFeatureExtractor, AutoModel

            return (AutoFeatureExtractor.from_pretrained(source),
                    AutoModel.from_pretrained(source))
        if self.ptm == "whisper":
            from transformers import WhisperFeatureExtractor, WhisperModel

            return (WhisperFeatureExtractor.from_pretrained(source),
                    WhisperModel.from_pretrained(source))
        if self.ptm == "xvector":
            from speechbrain.inference import EncoderClassifier

            return (None, EncoderClassifier.from_hparams(source=source))
        if self.ptm == "trillsson":
            import tensorflow_hub as hub

            return (None, hub.load(source))
        raise RuntimeError(f"no pretrained source for {self.ptm!r}")

    def __call__(self, samples: np.ndarray) -> np.ndarray:
        if self._model is None:
            try:
                self._model = self._load()
            except ImportError as exc:
                raise RuntimeError(
                    f"the {self.ptm!r} checkpoint needs {exc.name!r} installed; "
                    "install the 'pretrained' extra or use --backend spectral"
                ) from exc
        extractor, model = self._model
        import torch

        with torch.no_grad():
            if self.ptm == "whisper":
                feats = extractor(samples, sampling_rate=TARGET_SAMPLE_RATE,
                                  return_tensors="pt")
                hidden = model.encoder(feats.input_features).last_hidden_state
                return hidden.mean(dim=1)[0].numpy().astype(np.float32)
            if self.ptm in ("mms", "wavlm_or_unispeechsat"):
                feats = extractor(samples, sampling_rate=TARGET_SAMPLE_RATE,
                                  return_tensors="pt")
                hidden = model(feats.input_values).last_hidden_state
                return hidden.mean(dim=1)[0].numpy().astype(np.float32)
            if self.ptm == "xvector":
                emb = self._model[1].encode_batch(torch.from_numpy(samples)[None, :])
                return emb.squeeze().numpy().astype(np.float32)
        # trillsson: the hub module aggregates over time itself
        out = self._model[1](samples[None, :].astype(np.float32))["embedding"]
        return np.asarray(out)[0].astype(np.float32)


def get_backend(name: str, ptm: str):
    """Resolve a backend name to a callable samples -> vector."""
    if ptm not in PTM_DIMS:
        raise ValueError(f"unknown extractor {ptm!r}; known: {sorted(PTM_DIMS)}")
    if name == "spectral":
        return lambda samples: spectral_embed(samples, ptm)
    if name == "pretrained":
        return PretrainedBackend(ptm)
    raise ValueError(f"unknown backend {name!r}; use 'pretrained' or 'spectral'")
