import functools
from collections.abc import Callable
from enum import Enum
from pathlib import Path
from typing import Annotated, Any

import typer
from pydantic import ValidationError

from app.internal.classifiers.families import Family
from app.internal.env_settings import Settings, load_settings
from app.internal.errors import ScopeError
from app.internal.scoring.battery import DatasetSelection
from app.util.log import configure_logging, logger


class ModelChoice(str, Enum):
    lr = "lr"
    knn = "knn"
    rf = "rf"
    gbm = "gbm"
    all = "all"

    def families(self) -> list[Family]:
        if self == ModelChoice.all:
            return list(Family)
        return [Family(self.value)]


ConfigOption = Annotated[
    Path | None,
    typer.Option("--config", help="JSON run config. Flags and SCOPE_* env vars take precedence."),
]
DatasetOption = Annotated[
    DatasetSelection | None, typer.Option("--dataset", help="Feature set to build or model.")
]
SeedOption = Annotated[int | None, typer.Option("--seed", help="Master seed for splits, models and synthesis.")]
OutOption = Annotated[Path | None, typer.Option("--out", help="Output directory for all artifacts.")]
ModelOption = Annotated[ModelChoice | None, typer.Option("--model", help="Classifier family.")]
TopKOption = Annotated[int | None, typer.Option("--top-k", min=1, help="Features shown in figures.")]


def run_settings(
    config: Path | None,
    *,
    dataset: DatasetSelection | None = None,
    seed: int | None = None,
    out: Path | None = None,
    **sections: dict[str, Any],
) -> Settings:
    """Settings for one command: the common flags land in their sections, `sections` holds the rest."""
    overrides: dict[str, dict[str, Any]] = {name: dict(values) for name, values in sections.items()}
    if dataset is not None:
        overrides.setdefault("models", {})["dataset"] = dataset
    if seed is not None:
        overrides.setdefault("app", {})["seed"] = seed
    if out is not None:
        overrides.setdefault("paths", {})["output_dir"] = out
    settings = load_settings(config, **{k: v for k, v in overrides.items() if v})
    configure_logging(settings.app.log_level)
    return settings


def reports_errors[**P](command: Callable[P, None]) -> Callable[P, None]:
    """Turn pipeline and configuration errors into a logged message and exit status 1."""

    @functools.wraps(command)
    def wrapper(*args: P.args, **kwargs: P.kwargs) -> None:
        try:
            command(*args, **kwargs)
        except ScopeError as e:
            logger.error(e.detail, error=type(e).__name__)
            raise typer.Exit(code=1)
        except ValidationError as e:
            logger.error("Invalid configuration", detail=str(e))
            raise typer.Exit(code=1)

    return wrapper
