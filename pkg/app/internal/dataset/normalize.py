from pathlib import Path

import numpy as np
from pydantic import BaseModel

from app.internal.errors import ScopeError
from app.internal.models import FeatureMatrix


class NormalizationMismatch(ScopeError):
    pass


class NormalizationParams(BaseModel, frozen=True):
    """Per-feature min-max parameters fitted on training rows."""

    feature_names: list[str]
    mins: list[float]
    maxs: list[float]

    def save(self, path: Path):
        path.write_text(self.model_dump_json(indent=2))

    @classmethod
    def load(cls, path: Path) -> "NormalizationParams":
        return cls.model_validate_json(path.read_text())


def fit_minmax(matrix: FeatureMatrix) -> NormalizationParams:
    return NormalizationParams(
        feature_names=list(matrix.feature_names),
        mins=np.min(matrix.values, axis=0).tolist(),
        maxs=np.max(matrix.values, axis=0).tolist(),
    )


def scale_array(params: NormalizationParams, values: np.ndarray) -> np.ndarray:
    mins = np.asarray(params.mins)
    spans = np.asarray(params.maxs) - mins
    constant = spans == 0
    scaled = (values - mins) / np.where(constant, 1.0, spans)
    scaled[:, constant] = 0.0
    return np.clip(scaled, 0.0, 1.0)


def apply_minmax(params: NormalizationParams, matrix: FeatureMatrix) -> FeatureMatrix:
    if list(matrix.feature_names) != params.feature_names:
        raise NormalizationMismatch(
            "Normalization parameters were fitted on a different feature set"
        )
    return matrix.model_copy(update={"values": scale_array(params, matrix.values)})
