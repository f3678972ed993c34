from collections.abc import Iterable
from pathlib import Path

import pandas as pd
from pydantic import BaseModel

from app.internal.errors import ArtifactMissingError
from app.internal.models import FeatureMatrix
from app.util.log import logger


def ensure_dir(path: Path) -> Path:
    path.mkdir(parents=True, exist_ok=True)
    return path


def require_artifact(path: Path, producer: str) -> Path:
    if not path.exists():
        raise ArtifactMissingError(f"Artifact missing: {path}. Run `scope-pd {producer}` first")
    return path


def write_feature_matrix(matrix: FeatureMatrix, path: Path):
    matrix.to_frame().to_csv(path, index=False, float_format="%.10g")
    logger.info("Wrote feature matrix", path=str(path), rows=matrix.n_samples, features=matrix.n_features)


def read_feature_matrix(path: Path) -> FeatureMatrix:
    frame = pd.read_csv(require_artifact(path, "score"), dtype={"participant_id": str, "cohort": str})
    return FeatureMatrix.from_frame(frame, source=f"Feature file {path}")


def write_jsonl(records: Iterable[BaseModel], path: Path) -> int:
    count = 0
    with path.open("w") as f:
        for record in records:
            f.write(record.model_dump_json() + "\n")
            count += 1
    return count


def write_rows(rows: list[dict[str, object]], path: Path):
    pd.DataFrame(rows).to_csv(path, index=False, float_format="%.10f")
