"""Metrics and evaluation protocols.

Three protocols: within-language (train and test on one language's
split), the cross-lingual matrix (every train-language x test-language
cell), and merged-vs-individual comparison (the unified model's row
against each per-language model's row). Scores are reported as accuracy
and macro-F1; rendered output shows scores x100 at two decimals.
"""

from __future__ import annotations

import io
import csv
import json
from dataclasses import dataclass

import numpy as np

from collm.data import EmbeddingDataset, SplitManifest
from collm.errors import DataError, UsageError
from collm.models import Checkpoint, network_from_checkpoint

_EVAL_BATCH = 512


@dataclass
class MetricsReport:
    """Accuracy, macro-F1, per-class precision/recall/F1, confusion matrix.

    ``confusion[t][p]`` counts samples of true class t predicted as p.
    Zero-denominator precision/recall/F1 are defined as 0.
    """

    accuracy: float
    macro_f1: float
    per_class: tuple[dict, ...]   # one {precision, recall, f1} per class
    confusion: tuple[tuple[int, int], tuple[int, int]]
    count: int

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "per_class": [dict(c) for c in self.per_class],
            "confusion": [list(row) for row in self.confusion],
            "count": self.count,
        }


def _safe_div(num: float, den: float) -> float:
    return num / den if den else 0.0


def compute_metrics(y_true, y_pred) -> MetricsReport:
    """Metrics over paired truth/prediction label vectors."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise DataError(
            f"truth and predictions must be equal-length vectors, "
            f"got {y_true.shape} and {y_pred.shape}"
        )
    if len(y_true) == 0:
        raise UsageError("cannot compute metrics over zero samples")
    for name, arr in (("truth", y_true), ("prediction", y_pred)):
        if arr.min() < 0 or arr.max() > 1:
            raise DataError(f"{name} labels must be 0 or 1")
    cm = np.zeros((2, 2), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    n = len(y_true)
    per_class = []
    f1s = []
    for cls in (0, 1):
        tp = int(cm[cls, cls])
        precision = _safe_div(tp, int(cm[:, cls].sum()))
        recall = _safe_div(tp, int(cm[cls, :].sum()))
        f1 = _safe_div(2 * precision * recall, precision + recall)
        per_class.append({"precision": precision, "recall": recall, "f1": f1})
        f1s.append(f1)
    return MetricsReport(
        accuracy=float(cm.trace()) / n,
        macro_f1=float(np.mean(f1s)),
        per_class=tuple(per_class),
        confusion=tuple(tuple(int(x) for x in row) for row in cm),
        count=n,
    )


def predict_labels(ckpt: Checkpoint, datasets, network=None) -> np.ndarray:
    """Predicted labels for every record; ties resolve to class 0."""
    if isinstance(datasets, EmbeddingDataset):
        datasets = [datasets]
    dims = [ds.dim for ds in datasets]
    if dims != ckpt.spec.input_dims():
        raise DataError(
            f"dataset dimensions {dims} do not match the model's "
            f"{ckpt.spec.input_dims()}"
        )
    langs = {ds.language for ds in datasets}
    if len(langs) > 1:
        raise DataError(f"fusion inputs must share one language, got {sorted(langs)}")
    n = len(datasets[0])
    if any(len(ds) != n for ds in datasets):
        raise DataError("fusion inputs must have the same number of records")
    if network is None:
        network = network_from_checkpoint(ckpt)
    preds = np.empty(n, dtype=np.int64)
    for start in range(0, n, _EVAL_BATCH):
        stop = min(start + _EVAL_BATCH, n)
        logits = network.forward(
            [ds.vectors[start:stop] for ds in datasets], training=False
        )
        preds[start:stop] = logits[:, 1] > logits[:, 0]
    return preds


def evaluate(ckpt: Checkpoint, dataset, network=None) -> MetricsReport:
    """Deterministic metrics of a checkpoint over one dataset.

    ``dataset`` is an EmbeddingDataset, or a pair of them for fusion
    models (aligned record order is the caller's responsibility; use
    ``join_for_fusion`` for id-based alignment).
    """
    datasets = [dataset] if isinstance(dataset, EmbeddingDataset) else list(dataset)
    if len(datasets[0]) == 0:
        raise UsageError("cannot evaluate on an empty dataset")
    preds = predict_labels(ckpt, datasets, network=network)
    return compute_metrics(datasets[0].labels, preds)


@dataclass
class CrossMatrix:
    """Score grid: rows are training languages, columns are evaluation
    languages; the diagonal is within-language evaluation."""

    languages: tuple[str, ...]
    accuracy: tuple[tuple[float, ...], ...]
    macro_f1: tuple[tuple[float, ...], ...]

    def grid(self, metric: str):
        if metric == "accuracy":
            return self.accuracy
        if metric == "macro_f1":
            return self.macro_f1
        raise UsageError(f"unknown metric {metric!r}")

    def column_min(self, metric: str = "accuracy") -> dict[str, float]:
        grid = self.grid(metric)
        return {
            lang: min(grid[r][c] for r in range(len(self.languages)))
            for c, lang in enumerate(self.languages)
        }

    def row(self, language: str, metric: str = "accuracy") -> dict[str, float]:
        r = self.languages.index(language)
        return dict(zip(self.languages, self.grid(metric)[r]))

    def to_csv(self, metric: str = "accuracy") -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["train\\test", *self.languages])
        for r, lang in enumerate(self.languages):
            writer.writerow([lang, *(_score(v) for v in self.grid(metric)[r])])
        return out.getvalue()


def cross_eval(models: dict[str, Checkpoint], datasets: dict[str, EmbeddingDataset]) -> CrossMatrix:
    """Evaluate every model on every language's dataset.

    ``models`` and ``datasets`` must cover the same languages; the
    output grids follow the order of ``models``.
    """
    if not models:
        raise UsageError("cross evaluation requires at least one language")
    if set(models) != set(datasets):
        missing = sorted(set(models) ^ set(datasets))
        raise UsageError(
            f"models and datasets must cover the same languages; "
            f"unmatched: {missing}"
        )
    languages = tuple(models)
    acc_grid, f1_grid = [], []
    for train_lang in languages:
        network = network_from_checkpoint(models[train_lang])
        acc_row, f1_row = [], []
        for test_lang in languages:
            report = evaluate(models[train_lang], datasets[test_lang],
                              network=network)
            acc_row.append(report.accuracy)
            f1_row.append(report.macro_f1)
        acc_grid.append(tuple(acc_row))
        f1_grid.append(tuple(f1_row))
    return CrossMatrix(languages=languages, accuracy=tuple(acc_grid),
                       macro_f1=tuple(f1_grid))


def merged_vs_individual(individual: dict[str, Checkpoint], merged: Checkpoint,
                         datasets: dict[str, EmbeddingDataset]):
    """The unified model's per-language scores next to the individual
    models' cross-lingual matrix."""
    matrix = cross_eval(individual, datasets)
    network = network_from_checkpoint(merged)
    merged_row = {
        lang: evaluate(merged, datasets[lang], network=network)
        for lang in matrix.languages
    }
    return matrix, merged_row


def run_within_language(manifest: SplitManifest, spec, cfg, base_dir=None):
    """The within-language protocol: train on the manifest's train
    partition, report scores on its test partition."""
    from collm.optim import train

    train_ds, test_ds = manifest.load_datasets(base_dir)
    ckpt, history = train(spec, train_ds, cfg)
    report = evaluate(ckpt, test_ds)
    return ckpt, history, report


def _score(value: float) -> str:
    """Render one score x100 at two decimals (0.8629 -> '86.29')."""
    return f"{value * 100:.2f}"


def _flat_scores(report: MetricsReport) -> dict[str, str]:
    flat = {"accuracy": _score(report.accuracy), "macro_f1": _score(report.macro_f1)}
    for cls, stats in enumerate(report.per_class):
        for key in ("precision", "recall", "f1"):
            flat[f"{key}_{cls}"] = _score(stats[key])
    return flat


def render_report(reports, fmt: str) -> str:
    """Render one report or a name->report mapping as json, csv, or markdown."""
    if isinstance(reports, MetricsReport):
        reports = {"": reports}
    if not reports:
        raise UsageError("no reports to render")
    if fmt == "json":
        payload = {}
        for name, report in reports.items():
            entry = {k: float(v) for k, v in _flat_scores(report).items()}
            entry["count"] = report.count
            entry["confusion"] = [list(row) for row in report.confusion]
            payload[name or "model"] = entry
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if fmt == "csv":
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        cols = ["name", "count", "accuracy", "macro_f1",
                "precision_0", "recall_0", "f1_0",
                "precision_1", "recall_1", "f1_1"]
        writer.writerow(cols)
        for name, report in reports.items():
            flat = _flat_scores(report)
            writer.writerow([name or "model", report.count]
                            + [flat[c] for c in cols[2:]])
        return out.getvalue()
    if fmt in ("md", "markdown"):
        lines = ["| model | count | accuracy | macro-F1 |",
                 "|---|---|---|---|"]
        for name, report in reports.items():
            lines.append(
                f"| {name or 'model'} | {report.count} "
                f"| {_score(report.accuracy)} | {_score(report.macro_f1)} |"
            )
        return "\n".join(lines) + "\n"
    raise UsageError(f"unknown report format {fmt!r}; use json, csv, or md")
