"""Supported embedding extractors and their fixed output dimensions.

Clip-level pooling is an unweighted mean over time frames of the
encoder's last hidden states (the TRILLsson model already emits one
time-aggregated vector per clip, which is used as-is). Every extractor
consumes 16 kHz mono audio.
"""

PTM_DIMS = {
    "trillsson": 1024,
    "mms": 1280,
    "whisper": 512,
    "wavlm_or_unispeechsat": 768,
    "xvector": 512,
}

TARGET_SAMPLE_RATE = 16_000

# hub locations for the real checkpoints (multi-gigabyte downloads)
PRETRAINED_SOURCES = {
    "mms": "facebook/mms-1b",
    "whisper": "openai/whisper-base",
    "wavlm_or_unispeechsat": "microsoft/wavlm-base",
    "xvector": "speechbrain/spkrec-xvect-voxceleb",
    "trillsson": "https://tfhub.dev/google/nonsemantic-speech-benchmark/trillsson4/1",
}
