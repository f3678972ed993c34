import numpy as np
from pydantic import BaseModel, Field
from scipy.stats import rankdata

from app.internal.errors import ScopeError
from app.util.log import logger

DEFAULT_THRESHOLD = 0.5
METRIC_NAMES = ("accuracy", "precision", "recall", "f1", "roc_auc", "pr_auc")


class UndefinedMetricError(ScopeError):
    pass


class MetricSet(BaseModel, frozen=True):
    accuracy: float = Field(ge=0, le=1)
    precision: float = Field(ge=0, le=1)
    recall: float = Field(ge=0, le=1)
    f1: float = Field(ge=0, le=1)
    roc_auc: float | None = Field(default=None, ge=0, le=1)
    """`None` when the labels hold a single class."""
    pr_auc: float | None = Field(default=None, ge=0, le=1)
    """`None` when the labels hold no positives."""

    def value(self, name: str) -> float | None:
        return getattr(self, name)


def _class_sizes(y_true: np.ndarray) -> tuple[int, int]:
    n_pos = int(np.count_nonzero(y_true == 1))
    return y_true.size - n_pos, n_pos


def roc_auc(y_true: np.ndarray, y_score: np.ndarray) -> float:
    """Mann-Whitney U / (n_pos * n_neg); tied scores get half credit through average ranks."""
    n_neg, n_pos = _class_sizes(y_true)
    if n_neg == 0 or n_pos == 0:
        raise UndefinedMetricError("ROC-AUC is undefined when y_true holds a single class")
    ranks = rankdata(y_score, method="average")
    u = ranks[y_true == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def average_precision(y_true: np.ndarray, y_score: np.ndarray) -> float:
    """Sum of precision * (recall gain) over distinct score thresholds, highest first."""
    _, n_pos = _class_sizes(y_true)
    if n_pos == 0:
        raise UndefinedMetricError("Average precision is undefined without positive samples")
    order = np.argsort(-y_score, kind="stable")
    scores = y_score[order]
    hits = (y_true[order] == 1).astype(np.float64)
    tps = np.cumsum(hits)
    fps = np.cumsum(1.0 - hits)
    # last position of each run of equal scores
    boundary = np.r_[np.diff(scores) != 0, True]
    tps = tps[boundary]
    fps = fps[boundary]
    precision = tps / (tps + fps)
    recall = tps / n_pos
    return float(np.sum(np.diff(np.r_[0.0, recall]) * precision))


def confusion_counts(y_true: np.ndarray, y_pred: np.ndarray) -> np.ndarray:
    """[[TN, FP], [FN, TP]]: rows are the true class (HC, PD), columns the prediction."""
    counts = np.zeros((2, 2), dtype=np.int64)
    np.add.at(counts, (y_true.astype(np.intp), y_pred.astype(np.intp)), 1)
    return counts


def normalize_confusion(counts: np.ndarray) -> np.ndarray:
    totals = counts.sum(axis=1, keepdims=True).astype(np.float64)
    return np.divide(counts, totals, out=np.zeros((2, 2)), where=totals > 0)


def metrics_from_confusion(counts: np.ndarray) -> tuple[float, float, float, float]:
    (tn, fp), (fn, tp) = counts.tolist()
    total = tn + fp + fn + tp
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return (tn + tp) / total, precision, recall, f1


def compute_metrics(
    y_true: np.ndarray, y_score: np.ndarray, threshold: float = DEFAULT_THRESHOLD
) -> MetricSet:
    if y_true.shape != y_score.shape:
        raise ValueError(f"y_true has shape {y_true.shape} but y_score has {y_score.shape}")
    y_pred = (y_score >= threshold).astype(np.int64)
    accuracy, precision, recall, f1 = metrics_from_confusion(confusion_counts(y_true, y_pred))
    try:
        auc = roc_auc(y_true, y_score)
    except UndefinedMetricError as e:
        logger.warning("ROC-AUC undefined", reason=e.detail, samples=int(y_true.size))
        auc = None
    try:
        ap = average_precision(y_true, y_score)
    except UndefinedMetricError as e:
        logger.warning("PR-AUC undefined", reason=e.detail, samples=int(y_true.size))
        ap = None
    return MetricSet(
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        f1=f1,
        roc_auc=auc,
        pr_auc=ap,
    )
