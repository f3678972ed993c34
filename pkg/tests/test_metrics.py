import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from app.internal.evaluation.metrics import (
    UndefinedMetricError,
    average_precision,
    compute_metrics,
    confusion_counts,
    normalize_confusion,
    roc_auc,
)


def pairwise_auc(y: np.ndarray, s: np.ndarray) -> float:
    pos = s[y == 1]
    neg = s[y == 0]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return wins / (pos.size * neg.size)


def swept_average_precision(y: np.ndarray, s: np.ndarray) -> float:
    total = 0.0
    previous_recall = 0.0
    for threshold in sorted(set(s.tolist()), reverse=True):
        predicted = s >= threshold
        tp = np.count_nonzero(predicted & (y == 1))
        recall = tp / np.count_nonzero(y == 1)
        precision = tp / np.count_nonzero(predicted)
        total += (recall - previous_recall) * precision
        previous_recall = recall
    return total


labelled_scores = st.integers(2, 40).flatmap(
    lambda n: st.tuples(
        st.lists(st.integers(0, 1), min_size=n, max_size=n).filter(lambda ys: 0 < sum(ys) < len(ys)),
        st.lists(st.integers(0, 10).map(lambda v: v / 10), min_size=n, max_size=n),
    )
)


@settings(max_examples=100, deadline=None)
@given(data=labelled_scores)
def test_roc_auc_matches_pairwise_count(data: tuple[list[int], list[float]]):
    y, s = np.array(data[0]), np.array(data[1])
    assert roc_auc(y, s) == pytest.approx(pairwise_auc(y, s), abs=1e-12, rel=0)


@settings(max_examples=100, deadline=None)
@given(data=labelled_scores)
def test_average_precision_matches_threshold_sweep(data: tuple[list[int], list[float]]):
    y, s = np.array(data[0]), np.array(data[1])
    assert average_precision(y, s) == pytest.approx(swept_average_precision(y, s), abs=1e-12, rel=0)


@settings(max_examples=50, deadline=None)
@given(data=labelled_scores)
def test_ranking_metrics_ignore_monotone_transforms(data: tuple[list[int], list[float]]):
    y, s = np.array(data[0]), np.array(data[1])
    transformed = np.exp(3 * s) + 1
    assert roc_auc(y, transformed) == pytest.approx(roc_auc(y, s), abs=1e-12, rel=0)
    assert average_precision(y, transformed) == pytest.approx(average_precision(y, s), abs=1e-12, rel=0)


def test_constant_scores_give_chance_auc():
    y = np.array([0, 1, 0, 1, 1])
    assert roc_auc(y, np.full(5, 0.3)) == 0.5
    assert average_precision(y, np.full(5, 0.3)) == pytest.approx(0.6)


def test_perfect_ranking():
    y = np.array([0, 0, 1, 1])
    s = np.array([0.1, 0.2, 0.8, 0.9])
    assert roc_auc(y, s) == 1.0
    assert average_precision(y, s) == 1.0


def test_single_class_is_undefined():
    with pytest.raises(UndefinedMetricError):
        roc_auc(np.ones(3), np.array([0.1, 0.2, 0.3]))
    metrics = compute_metrics(np.ones(3, dtype=np.int64), np.array([0.1, 0.6, 0.9]))
    assert metrics.roc_auc is None
    assert metrics.pr_auc == 1.0
    assert metrics.recall == pytest.approx(2 / 3)


def test_all_negative_labels_leave_both_ranking_metrics_undefined():
    metrics = compute_metrics(np.zeros(3, dtype=np.int64), np.array([0.1, 0.6, 0.9]))
    assert metrics.roc_auc is None
    assert metrics.pr_auc is None
    assert metrics.precision == 0.0


def test_threshold_is_inclusive():
    y = np.array([1, 0])
    metrics = compute_metrics(y, np.array([0.5, 0.49]))
    assert metrics.accuracy == 1.0
    assert metrics.precision == 1.0


def test_confusion_layout():
    y_true = np.array([0, 0, 0, 1, 1])
    y_pred = np.array([0, 1, 1, 1, 0])
    counts = confusion_counts(y_true, y_pred)
    assert counts.tolist() == [[1, 2], [1, 1]]
    normalized = normalize_confusion(counts)
    assert np.allclose(normalized.sum(axis=1), 1.0)
    assert normalized[0, 1] == pytest.approx(2 / 3)


def test_no_positive_predictions_give_zero_precision():
    metrics = compute_metrics(np.array([1, 0, 1]), np.array([0.1, 0.2, 0.3]))
    assert metrics.precision == 0.0
    assert metrics.f1 == 0.0


def test_confusion_of_perfect_and_constant_classifiers():
    y = np.array([0, 0, 1, 1, 1])
    assert np.array_equal(normalize_confusion(confusion_counts(y, y)), np.eye(2))
    always_pd = normalize_confusion(confusion_counts(y, np.ones(5, dtype=np.int64)))
    assert always_pd.tolist() == [[0.0, 1.0], [0.0, 1.0]]
