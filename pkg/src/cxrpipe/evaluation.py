"""Confusion matrices, one-vs-rest metrics, ROC curves, fold aggregation.

Multiclass sensitivity/specificity/F1/AUC are macro-averaged
(unweighted mean over classes).  A class with no true samples has no
defined one-vs-rest statistics; such classes are excluded from the
macros with a warning instead of being coerced to zero.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .dataset import ClassLabel
from .errors import EvaluationError

N_CLASSES = len(ClassLabel)


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """counts[t][p]: samples of true class t predicted as class p."""

    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class PerClassMetrics:
    sensitivity: float | None
    specificity: float | None
    f1: float | None
    auc: float | None = None


@dataclass(frozen=True)
class CmMetrics:
    """Scalar metrics derivable from a confusion matrix alone."""

    accuracy: float
    sensitivity: float
    specificity: float
    f1: float
    per_class: tuple[PerClassMetrics, ...]


@dataclass(frozen=True)
class MetricsReport:
    """One fold's full report: CmMetrics plus macro and per-class AUC."""

    accuracy: float
    sensitivity: float
    specificity: float
    f1: float
    auc: float
    per_class: tuple[PerClassMetrics, ...]


@dataclass(frozen=True)
class RocCurve:
    """(fpr, tpr) points swept from the +inf sentinel threshold down."""

    points: tuple[tuple[float, float], ...]
    thresholds: tuple[float, ...]


@dataclass(frozen=True)
class AggregateStat:
    mean: float
    std: float | None


@dataclass(frozen=True)
class FoldAggregate:
    """Per-metric mean and sample (N-1) std over the evaluated folds."""

    stats: dict[str, AggregateStat]


def confusion_matrix(truth, predicted) -> ConfusionMatrix:
    truth = [int(t) for t in truth]
    predicted = [int(p) for p in predicted]
    if len(truth) != len(predicted):
        raise EvaluationError(
            f"truth ({len(truth)}) and predictions ({len(predicted)}) differ in length"
        )
    if not truth:
        raise EvaluationError("cannot tally an empty sample list")
    counts = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    for t, p in zip(truth, predicted):
        counts[t, p] += 1
    return ConfusionMatrix(counts)


def _macro(values: list[float | None], metric: str) -> float:
    defined = [v for v in values if v is not None]
    if not defined:
        raise EvaluationError(f"no class has a defined {metric}")
    if len(defined) < len(values):
        missing = [i for i, v in enumerate(values) if v is None]
        warnings.warn(
            f"{metric} undefined for classes {missing}; excluded from the macro average",
            stacklevel=3,
        )
    return float(np.mean(defined))


def metrics_from_cm(cm: ConfusionMatrix) -> CmMetrics:
    """Accuracy plus per-class and macro one-vs-rest sens/spec/F1.

    Classes absent from the truth have no defined statistics and do not
    enter the macros.
    """
    counts = cm.counts
    total = cm.total
    if total <= 0:
        raise EvaluationError("empty confusion matrix")
    accuracy = float(np.trace(counts) / total)

    per_class = []
    for c in range(N_CLASSES):
        tp = int(counts[c, c])
        fn = int(counts[c].sum() - tp)
        fp = int(counts[:, c].sum() - tp)
        tn = total - tp - fn - fp
        if tp + fn == 0:
            per_class.append(PerClassMetrics(None, None, None))
            continue
        sens = tp / (tp + fn)
        spec = tn / (tn + fp) if tn + fp > 0 else None
        if tp + fp > 0:
            prec = tp / (tp + fp)
            f1 = 0.0 if prec + sens == 0 else 2 * prec * sens / (prec + sens)
        else:
            f1 = None
        per_class.append(PerClassMetrics(sens, spec, f1))

    return CmMetrics(
        accuracy=accuracy,
        sensitivity=_macro([m.sensitivity for m in per_class], "sensitivity"),
        specificity=_macro([m.specificity for m in per_class], "specificity"),
        f1=_macro([m.f1 for m in per_class], "F1"),
        per_class=tuple(per_class),
    )


def roc_curve(scores, positives) -> RocCurve:
    """Threshold sweep over distinct scores, descending, ties grouped."""
    scores = np.asarray(scores, dtype=np.float64)
    positives = np.asarray(positives, dtype=bool)
    if scores.shape != positives.shape or scores.ndim != 1:
        raise EvaluationError("scores and positives must be 1-D and equal length")
    n_pos = int(positives.sum())
    n_neg = len(positives) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise EvaluationError("ROC needs at least one positive and one negative")

    order = np.argsort(-scores, kind="stable")
    points = [(0.0, 0.0)]
    thresholds = [math.inf]
    tp = fp = 0
    i = 0
    while i < len(order):
        j = i
        while j < len(order) and scores[order[j]] == scores[order[i]]:
            if positives[order[j]]:
                tp += 1
            else:
                fp += 1
            j += 1
        points.append((fp / n_neg, tp / n_pos))
        thresholds.append(float(scores[order[i]]))
        i = j
    return RocCurve(points=tuple(points), thresholds=tuple(thresholds))


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under the curve."""
    area = 0.0
    for (x0, y0), (x1, y1) in zip(curve.points, curve.points[1:]):
        area += (x1 - x0) * (y0 + y1) / 2.0
    return float(area)


def per_class_auc(probs, truth) -> list[float | None]:
    """One-vs-rest AUC per class; None where the class is degenerate."""
    probs = np.asarray(probs, dtype=np.float64)
    truth = np.asarray([int(t) for t in truth])
    if probs.ndim != 2 or probs.shape != (len(truth), N_CLASSES):
        raise EvaluationError(f"probability table must be ({len(truth)}, {N_CLASSES})")
    out: list[float | None] = []
    for c in range(N_CLASSES):
        mask = truth == c
        if not mask.any() or mask.all():
            out.append(None)
        else:
            out.append(auc(roc_curve(probs[:, c], mask)))
    return out


def macro_auc(probs, truth) -> float:
    """Mean one-vs-rest AUC, each class scored by its own probability."""
    return _macro(per_class_auc(probs, truth), "AUC")


def fold_report(truth, predicted, probs) -> MetricsReport:
    """Assemble the full per-fold report from labels and probability rows."""
    cm_metrics = metrics_from_cm(confusion_matrix(truth, predicted))
    class_aucs = per_class_auc(probs, truth)
    per_class = tuple(
        PerClassMetrics(m.sensitivity, m.specificity, m.f1, a)
        for m, a in zip(cm_metrics.per_class, class_aucs)
    )
    return MetricsReport(
        accuracy=cm_metrics.accuracy,
        sensitivity=cm_metrics.sensitivity,
        specificity=cm_metrics.specificity,
        f1=cm_metrics.f1,
        auc=_macro(class_aucs, "AUC"),
        per_class=per_class,
    )


METRIC_NAMES = ("accuracy", "sensitivity", "specificity", "f1", "auc")


def aggregate_folds(reports) -> FoldAggregate:
    """Mean and sample std of each macro metric over the fold reports."""
    reports = list(reports)
    if not reports:
        raise EvaluationError("no fold reports to aggregate")
    stats = {}
    for name in METRIC_NAMES:
        values = np.array([getattr(r, name) for r in reports], dtype=np.float64)
        std = float(values.std(ddof=1)) if len(values) >= 2 else None
        stats[name] = AggregateStat(mean=float(values.mean()), std=std)
    return FoldAggregate(stats=stats)
