# -*- coding: utf-8 -*-
"""
Метрики качества: ACC, ROC/AUC, EER

Положительный класс - fake (метка 1), оценка - вероятность класса fake.
FAR(t) - доля реальных с оценкой >= t, FRR(t) - доля поддельных с оценкой < t.
"""

import logging
from typing import List, Optional, Tuple

import numpy as np

from errors import UsageError
from models import EvalReport, ScoreSet

logger = logging.getLogger(__name__)


def _require_both_classes(scores: ScoreSet, what: str):
    if len(scores) == 0:
        raise UsageError(f"{what}: пустой набор оценок")
    if scores.positives.size == 0 or scores.negatives.size == 0:
        raise UsageError(f"{what}: нужны оба класса (fake: {scores.positives.size}, real: {scores.negatives.size})")


def accuracy(scores: ScoreSet, threshold: float = 0.5, predictions: Optional[np.ndarray] = None) -> float:
    """Доля образцов, где (score >= threshold) == (label == 1); либо по готовым предсказаниям"""
    if len(scores) == 0:
        raise UsageError("accuracy: пустой набор оценок")
    if predictions is None:
        predictions = scores.scores >= threshold
    predicted_fake = np.asarray(predictions).astype(bool)
    return float(np.mean(predicted_fake == (scores.labels == 1)))


def _class_counts_by_score(scores: ScoreSet) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Уникальные оценки по возрастанию и число fake/real на каждой"""
    unique, inverse = np.unique(scores.scores, return_inverse=True)
    pos = np.bincount(inverse[scores.labels == 1], minlength=unique.size)
    neg = np.bincount(inverse[scores.labels == 0], minlength=unique.size)
    return unique, pos.astype(np.int64), neg.astype(np.int64)


def auc(scores: ScoreSet) -> float:
    """
    Площадь под ROC методом трапеций по порогам.
    Считается в целых числах: 2*площадь*P*N = sum neg_k * (2*pos_выше + pos_k),
    что совпадает со статистикой Манна-Уитни (ничьи дают 1/2).
    """
    _require_both_classes(scores, "auc")
    _, pos, neg = _class_counts_by_score(scores)
    pos, neg = pos[::-1], neg[::-1]
    pos_above = np.cumsum(pos) - pos
    numerator = int(np.sum(neg * (2 * pos_above + pos)))
    denominator = 2 * int(pos.sum()) * int(neg.sum())
    return numerator / denominator


def roc_points(scores: ScoreSet) -> List[Tuple[float, float, float]]:
    """
    Точки (порог, FAR, FRR) по возрастанию порога.
    Пороги - уникальные оценки и последний порог чуть выше максимума (FAR=0, FRR=1).
    """
    _require_both_classes(scores, "roc")
    unique, pos, neg = _class_counts_by_score(scores)
    n_pos, n_neg = int(pos.sum()), int(neg.sum())
    thresholds = np.append(unique, np.nextafter(unique[-1], np.inf))
    neg_at_or_above = np.append(np.cumsum(neg[::-1])[::-1], 0)
    pos_below = np.concatenate([[0], np.cumsum(pos)])
    far = neg_at_or_above / n_neg
    frr = pos_below / n_pos
    return [(float(t), float(a), float(r)) for t, a, r in zip(thresholds, far, frr)]


def eer(scores: ScoreSet) -> Tuple[float, float]:
    """
    Equal error rate и порог: пересечение FAR и FRR с линейной интерполяцией
    между соседними точками перебора, где FAR - FRR меняет знак.
    """
    points = roc_points(scores)
    thresholds = np.array([p[0] for p in points])
    far = np.array([p[1] for p in points])
    frr = np.array([p[2] for p in points])
    diff = far - frr
    k = int(np.argmax(diff <= 0))
    if diff[k] == 0 or k == 0:
        return float(far[k]), float(thresholds[k])
    step = diff[k - 1] / (diff[k - 1] - diff[k])
    rate = far[k - 1] + step * (far[k] - far[k - 1])
    threshold = thresholds[k - 1] + step * (thresholds[k] - thresholds[k - 1])
    return float(rate), float(threshold)


def confusion_counts(scores: ScoreSet, predictions: np.ndarray) -> dict:
    predicted_fake = np.asarray(predictions).astype(bool)
    fake = scores.labels == 1
    return {
        "samples": len(scores),
        "fake": int(fake.sum()),
        "real": int((~fake).sum()),
        "true_fake": int((predicted_fake & fake).sum()),
        "true_real": int((~predicted_fake & ~fake).sum()),
        "false_fake": int((predicted_fake & ~fake).sum()),
        "false_real": int((~predicted_fake & fake).sum()),
    }


def evaluate(scores: ScoreSet, predictions: Optional[np.ndarray] = None, threshold: float = 0.5) -> EvalReport:
    """Полный отчёт. predictions (argmax логитов) задаёт ACC при оценке модели"""
    if predictions is None:
        predictions = scores.scores >= threshold
    rate, eer_threshold = eer(scores)
    report = EvalReport(
        acc=accuracy(scores, predictions=predictions),
        auc=auc(scores),
        eer=rate,
        eer_threshold=eer_threshold,
        roc=roc_points(scores),
        counts=confusion_counts(scores, predictions),
    )
    logger.info(f"[OK] ACC={report.acc:.4f} AUC={report.auc:.4f} EER={report.eer:.4f}")
    return report
