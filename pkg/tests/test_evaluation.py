import itertools
import math
import warnings

import numpy as np
import pytest

from cxrpipe.errors import EvaluationError
from cxrpipe.evaluation import (
    ConfusionMatrix,
    aggregate_folds,
    auc,
    confusion_matrix,
    fold_report,
    macro_auc,
    metrics_from_cm,
    roc_curve,
)

from oracles import pairwise_auc_oracle, sample_std_oracle


class TestConfusionMatrix:
    def test_identity_diagonal(self):
        cm = confusion_matrix([0, 1, 2, 3], [0, 1, 2, 3])
        assert np.array_equal(cm.counts, np.eye(4, dtype=np.int64))

    def test_off_diagonal_row(self):
        cm = confusion_matrix([0, 0], [1, 2])
        assert cm.counts[0, 1] == 1 and cm.counts[0, 2] == 1
        assert cm.total == 2

    def test_hand_tally(self):
        truth = [0, 0, 0, 1, 1, 2, 2, 2, 3, 3, 3, 3]
        pred = [0, 1, 0, 1, 1, 2, 3, 2, 3, 3, 0, 3]
        cm = confusion_matrix(truth, pred)
        expected = np.zeros((4, 4), dtype=np.int64)
        for t, p in zip(truth, pred):
            expected[t][p] += 1
        assert np.array_equal(cm.counts, expected)
        assert cm.counts.sum(axis=1).tolist() == [3, 2, 3, 4]

    def test_length_mismatch(self):
        with pytest.raises(EvaluationError):
            confusion_matrix([0, 1], [0])

    def test_row_sums_match_truth_counts(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            n = int(rng.integers(1, 60))
            truth = rng.integers(0, 4, n)
            pred = rng.integers(0, 4, n)
            cm = confusion_matrix(truth, pred)
            for c in range(4):
                assert cm.counts[c].sum() == (truth == c).sum()


class TestMetricsFromCm:
    def test_perfect_diagonal(self):
        cm = ConfusionMatrix(np.diag([50, 50, 50, 50]).astype(np.int64))
        m = metrics_from_cm(cm)
        assert m.accuracy == 1.0
        assert m.sensitivity == 1.0 and m.specificity == 1.0 and m.f1 == 1.0

    def test_all_predicted_class_zero(self):
        counts = np.zeros((4, 4), dtype=np.int64)
        counts[:, 0] = 50
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # F1 undefined for starved classes
            m = metrics_from_cm(ConfusionMatrix(counts))
        assert m.accuracy == 0.25
        assert m.per_class[0].specificity == 0.0
        assert all(m.per_class[c].specificity == 1.0 for c in (1, 2, 3))
        assert m.specificity == pytest.approx(0.75)

    def test_binary_region_padded_with_empty_classes(self):
        counts = np.zeros((4, 4), dtype=np.int64)
        counts[0, 0], counts[0, 1] = 8, 2
        counts[1, 0], counts[1, 1] = 3, 7
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            m = metrics_from_cm(ConfusionMatrix(counts))
        assert m.accuracy == pytest.approx(0.75)
        assert m.per_class[0].sensitivity == pytest.approx(0.8)
        assert m.per_class[1].sensitivity == pytest.approx(0.7)
        assert m.per_class[2].sensitivity is None
        assert m.per_class[3].sensitivity is None
        assert m.sensitivity == pytest.approx((0.8 + 0.7) / 2)

    def test_absent_class_warns(self):
        counts = np.zeros((4, 4), dtype=np.int64)
        counts[0, 0] = counts[1, 1] = 5
        with pytest.warns(UserWarning, match="excluded"):
            metrics_from_cm(ConfusionMatrix(counts))

    def test_empty_matrix_rejected(self):
        with pytest.raises(EvaluationError):
            metrics_from_cm(ConfusionMatrix(np.zeros((4, 4), dtype=np.int64)))

    def test_macro_metrics_invariant_under_relabeling(self):
        rng = np.random.default_rng(5)
        truth = rng.integers(0, 4, 200)
        pred = rng.integers(0, 4, 200)
        base = metrics_from_cm(confusion_matrix(truth, pred))
        for perm in [(1, 0, 3, 2), (3, 2, 1, 0), (2, 3, 0, 1)]:
            remap = np.array(perm)
            m = metrics_from_cm(confusion_matrix(remap[truth], remap[pred]))
            assert m.accuracy == pytest.approx(base.accuracy, abs=1e-12)
            assert m.sensitivity == pytest.approx(base.sensitivity, abs=1e-12)
            assert m.specificity == pytest.approx(base.specificity, abs=1e-12)
            assert m.f1 == pytest.approx(base.f1, abs=1e-12)


class TestRocCurve:
    def test_hand_sweep(self):
        curve = roc_curve([0.9, 0.8, 0.3, 0.2], [True, True, False, False])
        assert curve.points == ((0, 0), (0, 0.5), (0, 1), (0.5, 1), (1, 1))
        assert curve.thresholds[0] == math.inf
        assert curve.thresholds[1:] == (0.9, 0.8, 0.3, 0.2)

    def test_perfect_separation_hits_corner(self):
        curve = roc_curve([0.9, 0.8, 0.2, 0.1], [True, True, False, False])
        assert (0.0, 1.0) in curve.points
        assert auc(curve) == 1.0

    def test_full_tie_is_diagonal(self):
        curve = roc_curve([0.5, 0.5, 0.5, 0.5], [True, False, True, False])
        assert curve.points == ((0.0, 0.0), (1.0, 1.0))
        assert auc(curve) == 0.5

    def test_degenerate_membership_rejected(self):
        with pytest.raises(EvaluationError):
            roc_curve([0.1, 0.2], [True, True])

    def test_monotone_and_endpoints(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            n = int(rng.integers(2, 40))
            scores = rng.choice([0.1, 0.25, 0.5, 0.9], n)
            positives = rng.integers(0, 2, n).astype(bool)
            if positives.all() or not positives.any():
                continue
            curve = roc_curve(scores, positives)
            assert curve.points[0] == (0.0, 0.0)
            assert curve.points[-1] == (1.0, 1.0)
            xs = [p[0] for p in curve.points]
            ys = [p[1] for p in curve.points]
            assert all(a <= b for a, b in zip(xs, xs[1:]))
            assert all(a <= b for a, b in zip(ys, ys[1:]))


class TestAuc:
    def test_pairwise_example(self):
        curve = roc_curve([0.9, 0.8, 0.3, 0.2], [True, False, True, False])
        assert auc(curve) == pytest.approx(0.75, abs=1e-12)

    def test_matches_pairwise_oracle_with_ties(self):
        rng = np.random.default_rng(13)
        for _ in range(50):
            n = int(rng.integers(4, 50))
            scores = rng.choice(np.round(rng.random(5), 2), n)
            positives = rng.integers(0, 2, n).astype(bool)
            if positives.all() or not positives.any():
                continue
            got = auc(roc_curve(scores, positives))
            expected = pairwise_auc_oracle(scores.tolist(), positives.tolist())
            assert got == pytest.approx(expected, abs=1e-9)


class TestMacroAuc:
    def test_one_hot_correct(self):
        truth = [0, 1, 2, 3] * 3
        probs = np.zeros((12, 4))
        probs[np.arange(12), np.array(truth)] = 1.0
        assert macro_auc(probs, truth) == 1.0

    def test_uniform_probabilities(self):
        truth = [0, 1, 2, 3] * 3
        probs = np.full((12, 4), 0.25)
        assert macro_auc(probs, truth) == 0.5

    def test_random_table_matches_oracle(self):
        rng = np.random.default_rng(19)
        raw = rng.random((20, 4))
        probs = raw / raw.sum(axis=1, keepdims=True)
        truth = rng.integers(0, 4, 20)
        while len(set(truth.tolist())) < 4:
            truth = rng.integers(0, 4, 20)
        expected = np.mean(
            [
                pairwise_auc_oracle(probs[:, c].tolist(), (truth == c).tolist())
                for c in range(4)
            ]
        )
        assert macro_auc(probs, truth) == pytest.approx(expected, abs=1e-9)

    def test_absent_class_excluded_with_warning(self):
        truth = [0, 1, 2, 0, 1, 2]
        rng = np.random.default_rng(2)
        raw = rng.random((6, 4))
        probs = raw / raw.sum(axis=1, keepdims=True)
        with pytest.warns(UserWarning, match="AUC undefined"):
            value = macro_auc(probs, truth)
        assert 0.0 <= value <= 1.0


class TestAggregateFolds:
    def _report(self, accuracy):
        truth = [0, 1, 2, 3]
        probs = np.eye(4)
        report = fold_report(truth, [0, 1, 2, 3], probs)
        return type(report)(
            accuracy=accuracy,
            sensitivity=report.sensitivity,
            specificity=report.specificity,
            f1=report.f1,
            auc=report.auc,
            per_class=report.per_class,
        )

    def test_identical_reports_zero_std(self):
        agg = aggregate_folds([self._report(0.9)] * 3)
        assert agg.stats["accuracy"].mean == pytest.approx(0.9)
        assert agg.stats["accuracy"].std == 0.0

    def test_two_fold_hand_value(self):
        agg = aggregate_folds([self._report(0.8), self._report(0.9)])
        assert agg.stats["accuracy"].mean == pytest.approx(0.85)
        assert agg.stats["accuracy"].std == pytest.approx(sample_std_oracle([0.8, 0.9]))
        assert agg.stats["accuracy"].std == pytest.approx(0.0707, abs=5e-5)

    def test_single_fold_has_no_std(self):
        agg = aggregate_folds([self._report(0.8)])
        assert agg.stats["accuracy"].std is None


class TestFoldReport:
    def test_all_fields_in_unit_interval(self):
        rng = np.random.default_rng(29)
        truth = np.array([0, 1, 2, 3] * 10)
        raw = rng.random((40, 4))
        probs = raw / raw.sum(axis=1, keepdims=True)
        pred = probs.argmax(axis=1)
        report = fold_report(truth, pred, probs)
        for name in ("accuracy", "sensitivity", "specificity", "f1", "auc"):
            assert 0.0 <= getattr(report, name) <= 1.0
