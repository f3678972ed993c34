import json
from pathlib import Path

import numpy as np
import pytest

from app.internal.models import FeatureMatrix
from app.internal.scoring.battery import Battery, load_battery
from app.util.log import configure_logging
from tests.helpers import make_matrix


@pytest.fixture(scope="session")
def battery() -> Battery:
    return load_battery()


@pytest.fixture
def blobs() -> FeatureMatrix:
    """Two well-separated Gaussian blobs, 60 PD and 30 HC, in 4 features."""
    rng = np.random.default_rng(7)
    pd_rows = rng.normal(loc=2.0, scale=0.5, size=(60, 4))
    hc_rows = rng.normal(loc=-2.0, scale=0.5, size=(30, 4))
    return make_matrix(np.vstack([pd_rows, hc_rows]), [1] * 60 + [0] * 30)


@pytest.fixture
def noisy() -> FeatureMatrix:
    """Overlapping classes with the signal in feature 0 only."""
    rng = np.random.default_rng(11)
    targets = np.array([1] * 40 + [0] * 20)
    values = rng.normal(size=(60, 3))
    values[:, 0] += 1.5 * targets
    return make_matrix(values, targets)


@pytest.fixture
def small_grids(tmp_path: Path) -> Path:
    path = tmp_path / "grids.json"
    path.write_text(
        json.dumps(
            {
                "lr": {"lr_l2": [0.1]},
                "knn": {"k_neighbors": [3, 5]},
                "rf": {"n_trees": [10], "max_depth": [3]},
                "gbm": {"n_trees": [10], "max_depth": [2], "learning_rate": [0.3]},
            }
        )
    )
    return path


@pytest.fixture(autouse=True)
def quiet_logging():
    # commands reconfigure logging onto the runner's stream; point it back at the live one
    configure_logging("WARNING")
    yield
    configure_logging("WARNING")
