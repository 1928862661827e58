# -*- coding: utf-8 -*-
"""
Тесты метрик: ACC, AUC, EER, ROC
"""

import numpy as np
import pytest
from sklearn.metrics import roc_auc_score, roc_curve

from errors import ConfigError, UsageError
from evalmetrics import accuracy, auc, confusion_counts, eer, evaluate, roc_points
from models import ScoreSet
from oracles import auc_pairwise


def scores_of(pos, neg):
    return ScoreSet(np.array(list(pos) + list(neg)), np.array([1] * len(pos) + [0] * len(neg)))


class TestAccuracy:
    """ACC"""

    def test_all_correct(self):
        assert accuracy(scores_of([0.9, 0.6], [0.1, 0.4])) == 1.0

    def test_all_wrong(self):
        assert accuracy(ScoreSet(np.array([0.4, 0.6]), np.array([1, 0]))) == 0.0

    def test_threshold_is_inclusive(self):
        assert accuracy(ScoreSet(np.array([0.5]), np.array([1]))) == 1.0

    def test_matches_direct_count(self, rng):
        scores = rng.uniform(size=1000)
        labels = rng.integers(0, 2, size=1000)
        expected = sum(int((s >= 0.5) == (l == 1)) for s, l in zip(scores, labels)) / 1000
        assert accuracy(ScoreSet(scores, labels)) == expected

    def test_predictions_override_threshold(self):
        scores = ScoreSet(np.array([0.2, 0.9]), np.array([1, 0]))
        assert accuracy(scores, predictions=np.array([True, False])) == 1.0

    def test_empty(self):
        with pytest.raises(UsageError):
            accuracy(ScoreSet(np.array([]), np.array([])))


class TestAUC:
    """AUC"""

    def test_perfect_separation(self):
        assert auc(scores_of([0.9, 0.8], [0.1, 0.2])) == 1.0

    def test_three_of_four_pairs(self):
        assert auc(scores_of([0.8, 0.4], [0.6, 0.2])) == 0.75

    def test_all_ties(self):
        assert auc(scores_of([0.5] * 3, [0.5] * 4)) == 0.5

    def test_single_class(self):
        with pytest.raises(UsageError):
            auc(ScoreSet(np.array([0.1, 0.2]), np.array([1, 1])))

    def test_fuzz_against_pairwise(self):
        """Ровно равно перебору пар, включая ничьи"""
        rng = np.random.default_rng(5)
        for _ in range(100):
            n = int(rng.integers(2, 200))
            labels = rng.integers(0, 2, size=n)
            labels[0], labels[1] = 0, 1
            scores = rng.integers(0, 20, size=n) / 20.0
            assert auc(ScoreSet(scores, labels)) == auc_pairwise(scores, labels)

    def test_matches_sklearn(self, rng):
        scores = rng.uniform(size=500)
        labels = (rng.uniform(size=500) < scores).astype(int)
        assert auc(ScoreSet(scores, labels)) == pytest.approx(roc_auc_score(labels, scores), abs=1e-12)

    def test_monotone_transform_invariance(self, rng):
        scores = rng.uniform(size=300)
        labels = rng.integers(0, 2, size=300)
        assert auc(ScoreSet(scores, labels)) == auc(ScoreSet(np.exp(3 * scores), labels))

    def test_negation_complements(self, rng):
        scores = rng.permutation(200) / 200.0
        labels = rng.integers(0, 2, size=200)
        assert auc(ScoreSet(scores, labels)) + auc(ScoreSet(-scores, labels)) == pytest.approx(1.0)


class TestROCAndEER:
    """ROC и EER"""

    def test_roc_endpoints_and_monotonicity(self, rng):
        labels = rng.integers(0, 2, size=50)
        labels[:2] = [0, 1]
        points = roc_points(ScoreSet(rng.uniform(size=50), labels))
        thresholds = [p[0] for p in points]
        far = [p[1] for p in points]
        frr = [p[2] for p in points]
        assert thresholds == sorted(thresholds)
        assert far[0] == 1.0 and frr[0] == 0.0
        assert far[-1] == 0.0 and frr[-1] == 1.0
        assert all(a >= b for a, b in zip(far, far[1:]))
        assert all(a <= b for a, b in zip(frr, frr[1:]))

    def test_far_matches_sklearn(self, rng):
        scores = rng.uniform(size=200)
        labels = (rng.uniform(size=200) < scores).astype(int)
        fpr, tpr, thresholds = roc_curve(labels, scores, drop_intermediate=False)
        ours = {t: (far, frr) for t, far, frr in roc_points(ScoreSet(scores, labels))}
        for f, t, thr in zip(fpr[1:], tpr[1:], thresholds[1:]):
            far, frr = ours[float(thr)]
            assert far == pytest.approx(f)
            assert frr == pytest.approx(1 - t)

    def test_eer_perfect_separation(self):
        rate, _ = eer(scores_of([0.9, 0.8], [0.1, 0.2]))
        assert rate == 0.0

    def test_eer_step_crossing(self):
        rate, _ = eer(scores_of([0.8, 0.4], [0.6, 0.2]))
        assert rate == pytest.approx(0.5)

    def test_eer_symmetry(self, rng):
        scores = rng.uniform(size=100)
        labels = rng.integers(0, 2, size=100)
        labels[:2] = [0, 1]
        a, _ = eer(ScoreSet(scores, labels))
        b, _ = eer(ScoreSet(1.0 - scores, 1 - labels))
        assert a == pytest.approx(b, abs=1.0 / 100)

    def test_eer_bounded_by_best_threshold(self, rng):
        scores = rng.uniform(size=120)
        labels = (rng.uniform(size=120) < scores).astype(int)
        labels[:2] = [0, 1]
        data = ScoreSet(scores, labels)
        rate, _ = eer(data)
        best = min(max(far, frr) for _, far, frr in roc_points(data))
        assert 0.0 <= rate <= best + 1.0 / len(data)

    def test_eer_monotone_transform(self, rng):
        scores = rng.uniform(size=80)
        labels = rng.integers(0, 2, size=80)
        labels[:2] = [0, 1]
        a, _ = eer(ScoreSet(scores, labels))
        b, _ = eer(ScoreSet(scores ** 3, labels))
        assert a == pytest.approx(b)


class TestReport:
    """Полный отчёт"""

    def test_evaluate(self):
        report = evaluate(scores_of([0.9, 0.7, 0.3], [0.2, 0.6]))
        assert report.acc == pytest.approx(3 / 5)
        assert report.auc == pytest.approx(5 / 6)
        assert 0 <= report.eer <= 1
        assert report.counts["true_fake"] == 2 and report.counts["false_fake"] == 1
        data = report.to_dict()
        assert set(data) >= {"acc", "auc", "eer", "roc", "counts"}

    def test_confusion_counts(self):
        counts = confusion_counts(scores_of([0.9, 0.1], [0.8]), np.array([True, False, True]))
        assert counts == {"samples": 3, "fake": 2, "real": 1, "true_fake": 1, "true_real": 0,
                          "false_fake": 1, "false_real": 1}

    def test_scoreset_validation(self):
        with pytest.raises(ConfigError):
            ScoreSet(np.array([0.1, np.nan]), np.array([0, 1]))
        with pytest.raises(ConfigError):
            ScoreSet(np.array([0.1]), np.array([2]))
