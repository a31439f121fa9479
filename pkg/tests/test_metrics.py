"""Metrics against hand computations and an exact-arithmetic oracle."""

import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from collm.errors import DataError, UsageError
from collm.metrics import (
    CrossMatrix,
    compute_metrics,
    cross_eval,
    evaluate,
    render_report,
)
from collm.models import build_cnn, instantiate, Checkpoint
from collm.data import EmbeddingDataset
from collm.synth import SynthConfig, synth_generate


def recount_oracle(y_true, y_pred):
    """Exact rational recount of accuracy and macro-F1."""
    n = len(y_true)
    acc = Fraction(sum(1 for t, p in zip(y_true, y_pred) if t == p), n)
    f1s = []
    for cls in (0, 1):
        tp = sum(1 for t, p in zip(y_true, y_pred) if t == cls and p == cls)
        pred_c = sum(1 for p in y_pred if p == cls)
        true_c = sum(1 for t in y_true if t == cls)
        precision = Fraction(tp, pred_c) if pred_c else Fraction(0)
        recall = Fraction(tp, true_c) if true_c else Fraction(0)
        denom = precision + recall
        f1s.append(2 * precision * recall / denom if denom else Fraction(0))
    return acc, (f1s[0] + f1s[1]) / 2


class TestComputeMetrics:
    def test_hand_example(self):
        report = compute_metrics([0, 0, 0, 1, 1], [0, 0, 1, 1, 0])
        assert report.accuracy == 0.6
        assert report.per_class[0]["f1"] == pytest.approx(2 / 3, abs=1e-15)
        assert report.per_class[1]["f1"] == pytest.approx(0.5, abs=1e-15)
        assert report.macro_f1 == pytest.approx(7 / 12, abs=1e-15)
        assert report.confusion == ((2, 1), (1, 1))

    def test_perfect_predictions(self):
        report = compute_metrics([0, 1, 0, 1], [0, 1, 0, 1])
        assert report.accuracy == 1.0 and report.macro_f1 == 1.0

    def test_degenerate_single_class(self):
        report = compute_metrics([0, 0, 0], [0, 0, 0])
        assert report.accuracy == 1.0
        # class 1 never occurs: its F1 is 0 by the zero-denominator rule
        assert report.per_class[1]["f1"] == 0.0
        assert report.macro_f1 == 0.5

    def test_matches_recount_oracle(self):
        rng = np.random.default_rng(123)
        for _ in range(200):
            n = int(rng.integers(1, 40))
            y_true = rng.integers(0, 2, size=n)
            y_pred = rng.integers(0, 2, size=n)
            report = compute_metrics(y_true, y_pred)
            acc, macro = recount_oracle(y_true.tolist(), y_pred.tolist())
            assert report.accuracy == pytest.approx(float(acc), abs=1e-12)
            assert report.macro_f1 == pytest.approx(float(macro), abs=1e-12)

    @given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)),
                    min_size=1, max_size=60))
    @settings(max_examples=60, deadline=None)
    def test_label_swap_invariance(self, pairs):
        y_true = [t for t, _ in pairs]
        y_pred = [p for _, p in pairs]
        a = compute_metrics(y_true, y_pred)
        b = compute_metrics([1 - t for t in y_true], [1 - p for p in y_pred])
        assert a.macro_f1 == pytest.approx(b.macro_f1, abs=1e-12)
        assert a.accuracy == b.accuracy

    @given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)),
                    min_size=1, max_size=60), st.randoms())
    @settings(max_examples=40, deadline=None)
    def test_order_insensitive(self, pairs, random):
        shuffled = pairs[:]
        random.shuffle(shuffled)
        a = compute_metrics([t for t, _ in pairs], [p for _, p in pairs])
        b = compute_metrics([t for t, _ in shuffled], [p for _, p in shuffled])
        assert a.accuracy == b.accuracy and a.macro_f1 == b.macro_f1

    def test_accuracy_is_confusion_trace(self):
        rng = np.random.default_rng(5)
        y_true = rng.integers(0, 2, size=50)
        y_pred = rng.integers(0, 2, size=50)
        report = compute_metrics(y_true, y_pred)
        cm = np.array(report.confusion)
        assert report.accuracy == cm.trace() / cm.sum()

    def test_empty_rejected(self):
        with pytest.raises(UsageError):
            compute_metrics([], [])

    def test_bad_labels_rejected(self):
        with pytest.raises(DataError):
            compute_metrics([0, 2], [0, 1])


class TestRender:
    def test_two_decimal_convention(self):
        report = compute_metrics([0] * 8629 + [1] * 1371,
                                 [0] * 8629 + [0] * 1371)
        # accuracy 0.8629 renders exactly as "86.29"
        assert f"{report.accuracy * 100:.2f}" == "86.29"
        rendered = render_report({"malayalam": report}, "csv")
        assert "86.29" in rendered

    def test_json_round_trip(self):
        report = compute_metrics([0, 1, 1, 0, 1], [0, 1, 0, 0, 1])
        payload = json.loads(render_report({"m": report}, "json"))
        again = json.loads(render_report({"m": report}, "json"))
        assert payload == again
        assert payload["m"]["accuracy"] == float(f"{report.accuracy * 100:.2f}")

    def test_markdown_contains_scores(self):
        report = compute_metrics([0, 1], [0, 1])
        assert "100.00" in render_report(report, "md")

    def test_unknown_format(self):
        report = compute_metrics([0, 1], [0, 1])
        with pytest.raises(UsageError):
            render_report(report, "xml")

    def test_empty_input(self):
        with pytest.raises(UsageError):
            render_report({}, "json")


def _language_fixture(n_languages=2, seed=3):
    cfg = SynthConfig(n_languages=n_languages, dim=16, train_count=40,
                      test_count=24, seed=seed)
    data = synth_generate(cfg)
    spec = build_cnn(16, ptm="synthetic")
    models = {}
    datasets = {}
    rng = np.random.default_rng(seed)
    for lang, (_, test) in data.items():
        net = instantiate(spec, init_rng=int(rng.integers(1 << 30)))
        tensors = {k: v.astype(np.float32) for k, v in net.params().items()}
        models[lang] = Checkpoint(spec=spec, tensors=tensors, languages=(lang,))
        datasets[lang] = test
    return models, datasets


class TestEvaluateAndCrossEval:
    def test_empty_dataset_rejected(self):
        models, datasets = _language_fixture(1)
        ds = datasets["lang0"]
        empty = EmbeddingDataset(ds.language, ds.ptm, (), np.zeros(0, dtype=np.int64),
                                 np.zeros((0, 16), dtype=np.float32))
        with pytest.raises(UsageError):
            evaluate(models["lang0"], empty)

    def test_single_language_matrix(self):
        models, datasets = _language_fixture(1)
        matrix = cross_eval(models, datasets)
        assert matrix.languages == ("lang0",)
        direct = evaluate(models["lang0"], datasets["lang0"])
        assert matrix.accuracy[0][0] == direct.accuracy
        assert matrix.macro_f1[0][0] == direct.macro_f1

    def test_cell_ordering_follows_input_order(self):
        models, datasets = _language_fixture(2)
        matrix = cross_eval(models, datasets)
        assert matrix.languages == tuple(models)
        reversed_models = dict(reversed(list(models.items())))
        flipped = cross_eval(reversed_models, datasets)
        assert flipped.languages == tuple(reversed_models)
        assert flipped.accuracy[0][0] == matrix.accuracy[1][1]

    def test_diagonal_equals_within_language(self):
        models, datasets = _language_fixture(2)
        matrix = cross_eval(models, datasets)
        for i, lang in enumerate(matrix.languages):
            assert matrix.accuracy[i][i] == evaluate(models[lang], datasets[lang]).accuracy

    def test_missing_language_rejected(self):
        models, datasets = _language_fixture(2)
        del datasets["lang1"]
        with pytest.raises(UsageError, match="lang1"):
            cross_eval(models, datasets)

    def test_csv_has_language_headers(self):
        models, datasets = _language_fixture(2)
        matrix = cross_eval(models, datasets)
        csv_text = matrix.to_csv("accuracy")
        lines = csv_text.strip().splitlines()
        assert lines[0] == "train\\test,lang0,lang1"
        assert lines[1].startswith("lang0,")
        assert len(lines) == 3

    def test_column_min(self):
        matrix = CrossMatrix(
            languages=("a", "b"),
            accuracy=((0.9, 0.4), (0.6, 0.8)),
            macro_f1=((0.9, 0.4), (0.6, 0.8)),
        )
        assert matrix.column_min("accuracy") == {"a": 0.6, "b": 0.4}
