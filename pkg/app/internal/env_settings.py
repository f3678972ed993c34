from enum import Enum
from pathlib import Path
from typing import Any

from pydantic import BaseModel, Field, ValidationError
from pydantic_settings import (
    BaseSettings,
    JsonConfigSettingsSource,
    PydanticBaseSettingsSource,
    SettingsConfigDict,
)

from app.internal.classifiers.families import Family
from app.internal.dataset.split import SplitPlan
from app.internal.errors import ConfigurationError
from app.internal.models import CohortLabel
from app.internal.scoring.battery import DatasetSelection
from app.internal.synth.cohort import CohortPlan, EffectSpec


class PathSettings(BaseModel):
    output_dir: Path = Path("out")
    """Directory receiving every artifact of a run."""
    responses: Path | None = None
    """Raw response CSV. Defaults to `<output_dir>/responses.csv`."""
    instruments: Path | None = None
    """Instrument battery JSON. Defaults to the battery shipped with the package."""
    grids: Path | None = None
    """Hyperparameter grid JSON. Defaults to the grids shipped with the package."""

    def responses_path(self) -> Path:
        return self.responses or self.output_dir / "responses.csv"


class CleaningSettings(BaseModel):
    max_feature_missing_fraction: float = Field(default=0.1, ge=0, le=1)
    """Features missing in more than this fraction of rows are dropped before rows are."""
    cohorts: list[CohortLabel] = [CohortLabel.PD, CohortLabel.HC]

    def max_feature_missing(self, n_rows: int) -> int:
        return int(self.max_feature_missing_fraction * n_rows)


class SplitSettings(BaseModel):
    test_fraction: float = Field(default=0.2, gt=0, lt=1)
    k_folds: int = Field(default=5, ge=2)


class ModelSettings(BaseModel):
    dataset: DatasetSelection = DatasetSelection.combined
    families: list[Family] = [Family.lr, Family.knn, Family.rf, Family.gbm]


class ExplainScope(str, Enum):
    cohort = "cohort"
    test = "test"


class ExplainSettings(BaseModel):
    model: Family = Family.rf
    top_k: int = Field(default=10, ge=1)
    scope: ExplainScope = ExplainScope.cohort
    participants: list[str] = []
    """Participants that get a waterfall. Empty picks the first PD participant in scope."""


def _default_effects() -> list[EffectSpec]:
    return [EffectSpec(feature_name=item) for item in ("NP2TRMR", "NP3BRADY", "NP3FACXP")]


class SynthSettings(BaseModel):
    n_pd: int = Field(default=400, gt=0)
    n_hc: int = Field(default=100, gt=0)
    effects: list[EffectSpec] = Field(default_factory=_default_effects)
    item_missing_rates: dict[str, float] = {"VLTANIM": 0.227}
    sporadic_missing_rate: float = Field(default=0.0005, ge=0, lt=1)

    def plan(self, seed: int) -> CohortPlan:
        return CohortPlan(
            n_pd=self.n_pd,
            n_hc=self.n_hc,
            effects=self.effects,
            seed=seed,
            item_missing_rates=self.item_missing_rates,
            sporadic_missing_rate=self.sporadic_missing_rate,
        )


class ApplicationSettings(BaseModel):
    log_level: str = "INFO"
    n_jobs: int = Field(default=1, ge=1)
    """Worker threads for grid cells, folds and forest trees."""
    seed: int = 42


class Settings(BaseSettings):
    model_config = SettingsConfigDict(  # pyright: ignore[reportUnannotatedClassAttribute]
        env_prefix="SCOPE_",
        env_nested_delimiter="__",
        nested_model_default_partial_update=True,
        env_file=(".env.local", ".env"),
        extra="forbid",
    )

    paths: PathSettings = PathSettings()
    cleaning: CleaningSettings = CleaningSettings()
    split: SplitSettings = SplitSettings()
    models: ModelSettings = ModelSettings()
    explain: ExplainSettings = ExplainSettings()
    synth: SynthSettings = SynthSettings()
    app: ApplicationSettings = ApplicationSettings()

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> tuple[PydanticBaseSettingsSource, ...]:
        return (
            init_settings,
            env_settings,
            dotenv_settings,
            JsonConfigSettingsSource(settings_cls),
            file_secret_settings,
        )

    def split_plan(self) -> SplitPlan:
        return SplitPlan(
            seed=self.app.seed,
            test_fraction=self.split.test_fraction,
            k_folds=self.split.k_folds,
        )


def load_settings(config_path: Path | None = None, **overrides: Any) -> Settings:
    """
    Build settings from (highest first) `overrides`, the environment, `.env` files and
    the JSON run config at `config_path`.
    """
    settings_cls: type[Settings] = Settings
    if config_path is not None:
        if not config_path.is_file():
            raise ConfigurationError(f"Config file {config_path} does not exist")

        class FileSettings(Settings):
            model_config = SettingsConfigDict(  # pyright: ignore[reportUnannotatedClassAttribute]
                **Settings.model_config, json_file=config_path
            )

        settings_cls = FileSettings
    try:
        return settings_cls(**overrides)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid configuration: {e}")
