from enum import Enum
from typing import Self

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, model_validator

from app.internal.errors import ScopeError


class CohortLabel(str, Enum):
    PD = "PD"
    HC = "HC"
    Prodromal = "Prodromal"
    SWEDD = "SWEDD"


class LabelError(ScopeError):
    pass


class FeatureFileError(ScopeError):
    pass


class FeatureMatrix(BaseModel):
    """
    Samples x named features with cohort labels.

    `values` holds floats; NaN marks a missing cell and is only allowed before cleaning.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)  # pyright: ignore[reportUnannotatedClassAttribute]

    feature_names: tuple[str, ...]
    values: np.ndarray
    labels: tuple[CohortLabel, ...]
    participant_ids: tuple[str, ...]

    @model_validator(mode="after")
    def _check_shape(self) -> Self:
        if self.values.ndim != 2:
            raise ValueError("values must be a 2-d array")
        n_rows, n_cols = self.values.shape
        if not (n_rows == len(self.labels) == len(self.participant_ids)):
            raise ValueError(
                f"row count mismatch: {n_rows} rows, {len(self.labels)} labels, {len(self.participant_ids)} ids"
            )
        if n_cols != len(self.feature_names):
            raise ValueError(
                f"column count mismatch: {n_cols} columns, {len(self.feature_names)} names"
            )
        if len(set(self.feature_names)) != len(self.feature_names):
            raise ValueError("feature names must be unique")
        return self

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    def has_missing(self) -> bool:
        return bool(np.isnan(self.values).any())

    def take(self, rows: np.ndarray | list[int]) -> "FeatureMatrix":
        index = np.asarray(rows, dtype=np.intp)
        return FeatureMatrix(
            feature_names=self.feature_names,
            values=self.values[index],
            labels=tuple(self.labels[i] for i in index),
            participant_ids=tuple(self.participant_ids[i] for i in index),
        )

    def select_features(self, columns: np.ndarray | list[int]) -> "FeatureMatrix":
        index = np.asarray(columns, dtype=np.intp)
        return FeatureMatrix(
            feature_names=tuple(self.feature_names[i] for i in index),
            values=self.values[:, index],
            labels=self.labels,
            participant_ids=self.participant_ids,
        )

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.values, columns=list(self.feature_names))
        frame.insert(0, "cohort", [label.value for label in self.labels])
        frame.insert(0, "participant_id", list(self.participant_ids))
        return frame

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, source: str = "feature table") -> "FeatureMatrix":
        missing = [c for c in ("participant_id", "cohort") if c not in frame.columns]
        if missing:
            raise FeatureFileError(f"{source} lacks columns {missing}")
        feature_names = [c for c in frame.columns if c not in ("participant_id", "cohort")]
        known = {label.value for label in CohortLabel}
        for row, cohort in enumerate(frame["cohort"]):
            if cohort not in known:
                raise FeatureFileError(f"{source} row {row + 1}: cohort {cohort!r} is not one of {sorted(known)}")
        for name in feature_names:
            numeric = pd.to_numeric(frame[name], errors="coerce")
            bad = numeric.isna() & frame[name].notna()
            if bad.any():
                row = int(np.argmax(bad.to_numpy()))
                raise FeatureFileError(
                    f"{source} row {row + 1}: feature {name} holds non-numeric value {frame[name].iloc[row]!r}"
                )
        try:
            return cls(
                feature_names=tuple(str(c) for c in feature_names),
                values=frame[feature_names].apply(pd.to_numeric).to_numpy(dtype=np.float64),
                labels=tuple(CohortLabel(str(v)) for v in frame["cohort"]),
                participant_ids=tuple(str(v) for v in frame["participant_id"]),
            )
        except ValueError as e:
            raise FeatureFileError(f"{source} is not a valid feature matrix: {e}") from e


def binary_targets(matrix: FeatureMatrix) -> np.ndarray:
    """PD -> 1, HC -> 0. Any other cohort is rejected."""
    targets = np.empty(matrix.n_samples, dtype=np.int64)
    for i, label in enumerate(matrix.labels):
        match label:
            case CohortLabel.PD:
                targets[i] = 1
            case CohortLabel.HC:
                targets[i] = 0
            case _:
                raise LabelError(
                    f"Participant {matrix.participant_ids[i]} has cohort {label.value}; "
                    + "binary tasks only accept PD and HC (filter cohorts first)"
                )
    return targets
