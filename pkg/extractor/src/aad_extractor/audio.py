"""WAV decoding and resampling to the extractor input rate."""

from __future__ import annotations

import wave
from pathlib import Path

import numpy as np

from aad_extractor.ptms import TARGET_SAMPLE_RATE


class AudioDecodeError(Exception):
    """The clip could not be decoded; callers skip and report it."""


def load_clip(path) -> np.ndarray:
    """Decode a WAV file to mono float32 at 16 kHz.

    PCM 8/16/32-bit and multi-channel files are accepted; channels are
    averaged and anything not at 16 kHz is linearly resampled.
    """
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as wav:
            rate = wav.getframerate()
            channels = wav.getnchannels()
            width = wav.getsampwidth()
            frames = wav.readframes(wav.getnframes())
    except (wave.Error, EOFError, OSError) as exc:
        raise AudioDecodeError(f"{path.name}: {exc}") from exc
    if width == 2:
        samples = np.frombuffer(frames, dtype="<i2").astype(np.float32) / 32768.0
    elif width == 4:
        samples = np.frombuffer(frames, dtype="<i4").astype(np.float32) / 2147483648.0
    elif width == 1:
        samples = (np.frombuffer(frames, dtype=np.uint8).astype(np.float32) - 128.0) / 128.0
    else:
        raise AudioDecodeError(f"{path.name}: unsupported sample width {width}")
    if channels > 1:
        samples = samples.reshape(-1, channels).mean(axis=1)
    if len(samples) == 0:
        raise AudioDecodeError(f"{path.name}: empty audio stream")
    if rate != TARGET_SAMPLE_RATE:
        samples = _resample(samples, rate, TARGET_SAMPLE_RATE)
    return samples


def _resample(samples: np.ndarray, rate: int, target: int) -> np.ndarray:
    n_out = max(1, int(round(len(samples) * target / rate)))
    src_pos = np.arange(n_out, dtype=np.float64) * (len(samples) - 1) / max(1, n_out - 1)
    return np.interp(src_pos, np.arange(len(samples)), samples).astype(np.float32)
