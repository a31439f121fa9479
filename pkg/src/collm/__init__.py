"""Multilingual audio-abuse classifiers on speech embeddings, plus
training-free merging of per-language models into one unified model."""

from collm.ackp import read_checkpoint, write_checkpoint
from collm.data import (
    EmbeddingDataset,
    SplitManifest,
    join_for_fusion,
    read_embeddings,
    write_embeddings,
)
from collm.merge import MergeConfig, collm_merge, l1_normalize, plugin_merge
from collm.metrics import CrossMatrix, MetricsReport, cross_eval, evaluate, render_report
from collm.models import (
    ArchitectureSpec,
    Checkpoint,
    PtmInfo,
    build_cnn,
    build_fusion,
    build_transformer,
    predict,
)
from collm.optim import RAdam, TrainConfig, cross_entropy, train
from collm.synth import SynthConfig, synth_generate

__version__ = "0.1.0"

__all__ = [
    "ArchitectureSpec", "Checkpoint", "CrossMatrix", "EmbeddingDataset",
    "MergeConfig", "MetricsReport", "PtmInfo", "RAdam", "SplitManifest",
    "SynthConfig", "TrainConfig", "build_cnn", "build_fusion",
    "build_transformer", "collm_merge", "cross_entropy", "cross_eval",
    "evaluate", "join_for_fusion", "l1_normalize", "plugin_merge", "predict",
    "read_checkpoint", "read_embeddings", "render_report", "synth_generate",
    "train", "write_checkpoint", "write_embeddings",
]
