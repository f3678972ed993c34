from pathlib import Path

from pydantic import BaseModel

from app.internal.classifiers.ensemble import EnsembleRecord, TreeEnsemble
from app.internal.classifiers.families import Family, Pipeline
from app.internal.classifiers.knn import KnnModel
from app.internal.classifiers.logreg import LogisticModel
from app.internal.classifiers.params import Hyperparams
from app.internal.dataset.normalize import NormalizationParams
from app.internal.errors import ArtifactMissingError, ConfigurationError
from app.internal.scoring.battery import DatasetSelection


class LinearRecord(BaseModel):
    coef: list[float]
    intercept: float


class ModelArtifact(BaseModel):
    """
    Everything `explain` needs from a training run: the refit model, the scaling it
    was trained under and which participants were held out.
    """

    family: Family
    dataset: DatasetSelection
    params: Hyperparams
    normalization: NormalizationParams
    test_ids: list[str]
    ensemble: EnsembleRecord | None = None
    linear: LinearRecord | None = None

    @classmethod
    def from_pipeline(
        cls, pipeline: Pipeline, dataset: DatasetSelection, test_ids: list[str]
    ) -> "ModelArtifact":
        ensemble = None
        linear = None
        match pipeline.model:
            case TreeEnsemble() as model:
                ensemble = model.to_record()
            case LogisticModel() as model:
                linear = LinearRecord(coef=model.coef.tolist(), intercept=model.intercept)
            case KnnModel():
                # neighbours are the training rows; nothing beyond params is stored
                pass
            case _:
                raise ConfigurationError(f"Cannot serialize model of type {type(pipeline.model).__name__}")
        return cls(
            family=pipeline.family,
            dataset=dataset,
            params=pipeline.params,
            normalization=pipeline.normalization,
            test_ids=test_ids,
            ensemble=ensemble,
            linear=linear,
        )

    def tree_ensemble(self) -> TreeEnsemble:
        if self.ensemble is None:
            raise ConfigurationError(
                f"Model family {self.family.value} is not a tree ensemble and cannot be explained; "
                + "train with --model rf or --model gbm"
            )
        return self.ensemble.to_ensemble()

    def save(self, path: Path):
        path.write_text(self.model_dump_json())

    @classmethod
    def load(cls, path: Path) -> "ModelArtifact":
        if not path.exists():
            raise ArtifactMissingError(
                f"Model artifact missing: {path}. Run `scope-pd train-eval` for this model and dataset first"
            )
        return cls.model_validate_json(path.read_text())


def artifact_path(output_dir: Path, family: Family, dataset: DatasetSelection) -> Path:
    return output_dir / f"model_{family.value}_{dataset.value}.json"
