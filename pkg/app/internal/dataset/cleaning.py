from collections.abc import Iterable

import numpy as np

from app.internal.errors import ScopeError
from app.internal.models import CohortLabel, FeatureMatrix
from app.util.log import logger


class EmptyMatrixError(ScopeError):
    pass


def drop_missing(matrix: FeatureMatrix, max_feature_missing: int) -> FeatureMatrix:
    """
    Two-stage removal: features missing in more than `max_feature_missing` rows go first,
    then every row that still has a missing cell.
    """
    missing = np.isnan(matrix.values)
    per_feature = missing.sum(axis=0)
    kept_features = np.flatnonzero(per_feature <= max_feature_missing)
    if kept_features.size == 0:
        raise EmptyMatrixError(
            f"Every feature is missing in more than {max_feature_missing} rows"
        )
    dropped = [matrix.feature_names[i] for i in np.flatnonzero(per_feature > max_feature_missing)]
    reduced = matrix.select_features(kept_features)

    kept_rows = np.flatnonzero(~np.isnan(reduced.values).any(axis=1))
    if kept_rows.size == 0:
        raise EmptyMatrixError("Every sample has at least one missing value")
    cleaned = reduced.take(kept_rows)
    logger.info(
        "Dropped missing data",
        dropped_features=dropped,
        dropped_samples=matrix.n_samples - cleaned.n_samples,
        samples=cleaned.n_samples,
        features=cleaned.n_features,
    )
    return cleaned


def filter_cohorts(matrix: FeatureMatrix, keep: Iterable[CohortLabel]) -> FeatureMatrix:
    keep = set(keep)
    if not keep:
        raise ValueError("At least one cohort must be kept")
    rows = [i for i, label in enumerate(matrix.labels) if label in keep]
    if not rows:
        raise EmptyMatrixError(
            f"No samples left after keeping cohorts {sorted(label.value for label in keep)}"
        )
    return matrix.take(rows)


def cohort_counts(matrix: FeatureMatrix) -> dict[str, int]:
    counts: dict[str, int] = {}
    for label in matrix.labels:
        counts[label.value] = counts.get(label.value, 0) + 1
    return counts
