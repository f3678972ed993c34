import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Self, final

import numpy as np
from pydantic import BaseModel, TypeAdapter, ValidationError, model_validator

from app.internal.classifiers.families import Family, Pipeline, covering_params, fit_pipeline
from app.internal.classifiers.params import Hyperparams
from app.internal.dataset.split import Fold, SplitPlan, stratified_kfold
from app.internal.errors import ConfigurationError, ScopeError
from app.internal.evaluation.metrics import (
    DEFAULT_THRESHOLD,
    MetricSet,
    compute_metrics,
    confusion_counts,
    normalize_confusion,
)
from app.internal.evaluation.report import FoldReport
from app.internal.models import FeatureMatrix, binary_targets
from app.util.log import logger


class GridSearchError(ScopeError):
    pass


class GridSpec(BaseModel, frozen=True):
    """Lists of candidate values per hyperparameter; cells are their Cartesian product in declared order."""

    family: Family
    grid: dict[str, list[Any]]

    @model_validator(mode="after")
    def _check_grid(self) -> Self:
        unknown = [name for name in self.grid if name not in Hyperparams.model_fields]
        if unknown:
            raise ValueError(f"Unknown hyperparameters in {self.family.value} grid: {unknown}")
        empty = [name for name, values in self.grid.items() if not values]
        if empty:
            raise ValueError(f"Empty value lists in {self.family.value} grid: {empty}")
        return self

    def cells(self, base: Hyperparams | None = None) -> list[Hyperparams]:
        base = base or Hyperparams()
        names = list(self.grid)
        return [
            Hyperparams.model_validate(base.model_dump() | dict(zip(names, values)))
            for values in itertools.product(*self.grid.values())
        ]


def default_grids_path() -> Path:
    return Path(str(resources.files("app") / "config" / "grids.json"))


_grid_file = TypeAdapter(dict[Family, dict[str, list[Any]]])


def load_grids(path: Path | None = None) -> dict[Family, GridSpec]:
    path = path or default_grids_path()
    if not path.exists():
        raise ConfigurationError(f"Grid config {path} does not exist")
    try:
        raw = _grid_file.validate_json(path.read_bytes())
        return {family: GridSpec(family=family, grid=grid) for family, grid in raw.items()}
    except ValidationError as e:
        raise ConfigurationError(f"Invalid grid config {path}: {e}")


def evaluate_fold(
    family: Family,
    params: Hyperparams,
    matrix: FeatureMatrix,
    fold: Fold,
    fold_index: int,
    n_jobs: int = 1,
) -> tuple[FoldReport, np.ndarray]:
    """Fit on the fold's training rows (normalization included) and score its validation rows."""
    train_idx, _ = fold
    pipeline = fit_pipeline(family, matrix.take(train_idx), params, n_jobs=n_jobs)
    return score_fold(pipeline, matrix, fold, fold_index)


def score_fold(
    pipeline: Pipeline, matrix: FeatureMatrix, fold: Fold, fold_index: int
) -> tuple[FoldReport, np.ndarray]:
    _, valid_idx = fold
    valid = matrix.take(valid_idx)
    y_true = binary_targets(valid)
    scores = pipeline.predict_proba(valid)
    metrics = compute_metrics(y_true, scores)
    y_pred = (scores >= DEFAULT_THRESHOLD).astype(np.int64)
    report = FoldReport(
        fold_index=fold_index,
        metrics=metrics,
        confusion=confusion_counts(y_true, y_pred).tolist(),
    )
    return report, scores


def shared_fit_groups(family: Family, cells: list[Hyperparams]) -> list[list[int]]:
    """
    Cell indices grouped so that one fit serves a whole group: cells that differ only in
    the family's nested hyperparameters. Other families get a group per cell.
    """
    groups: dict[Hyperparams, list[int]] = {}
    for c, params in enumerate(cells):
        key = params.model_copy(update=dict.fromkeys(family.nested_params))
        groups.setdefault(key, []).append(c)
    return list(groups.values())


@final
@dataclass(frozen=True)
class CellResult:
    params: Hyperparams
    reports: list[FoldReport]
    error: str | None = None

    @property
    def mean_f1(self) -> float | None:
        if self.error is not None:
            return None
        return float(np.mean([r.metrics.f1 for r in self.reports]))


@final
@dataclass(frozen=True)
class GridSearchResult:
    best: Hyperparams
    best_reports: list[FoldReport]
    cells: list[CellResult]


def grid_search_cv(
    family: Family,
    grid: GridSpec,
    train: FeatureMatrix,
    plan: SplitPlan,
    n_jobs: int = 1,
) -> GridSearchResult:
    """
    Exhaustive search maximizing mean validation F1 over stratified folds of `train`.
    Ties go to the earlier cell. Cells differing only in nested hyperparameters share one
    fit per fold that each of them is cut from. Groups and folds run on a thread pool;
    results are reduced in grid order so the outcome does not depend on `n_jobs`.
    """
    cells = grid.cells(Hyperparams(seed=plan.seed))
    folds = stratified_kfold(train, plan)
    groups = shared_fit_groups(family, cells)
    jobs = [(g, f) for g in range(len(groups)) for f in range(len(folds))]

    def run_cell(cell: int, fold: int) -> FoldReport | str:
        try:
            return evaluate_fold(family, cells[cell], train, folds[fold], fold)[0]
        except ScopeError as e:
            return e.detail

    def run(job: tuple[int, int]) -> list[FoldReport | str]:
        group, fold = job
        members = groups[group]
        if len(members) == 1:
            return [run_cell(members[0], fold)]
        try:
            covering = covering_params(family, [cells[c] for c in members])
            fitted = fit_pipeline(family, train.take(folds[fold][0]), covering)
            return [score_fold(fitted.cut(cells[c]), train, folds[fold], fold)[0] for c in members]
        except ScopeError:
            # retry each cell on its own
            return [run_cell(c, fold) for c in members]

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            outcomes = list(pool.map(run, jobs))
    else:
        outcomes = [run(job) for job in jobs]

    per_cell: list[list[FoldReport | str]] = [[] for _ in cells]
    for (group, _), outcome in zip(jobs, outcomes):
        for c, result in zip(groups[group], outcome):
            per_cell[c].append(result)

    results: list[CellResult] = []
    for params, cell_outcomes in zip(cells, per_cell):
        failures = [o for o in cell_outcomes if isinstance(o, str)]
        reports = [o for o in cell_outcomes if isinstance(o, FoldReport)]
        results.append(CellResult(params=params, reports=reports, error=failures[0] if failures else None))

    best: CellResult | None = None
    best_score = -np.inf
    for result in results:
        score = result.mean_f1
        logger.debug(
            "Grid cell scored",
            family=family.value,
            params=_grid_values(grid, result.params),
            mean_f1=score,
            error=result.error,
        )
        if score is not None and score > best_score:
            best, best_score = result, score
    if best is None:
        listing = "; ".join(f"{_grid_values(grid, r.params)}: {r.error}" for r in results)
        raise GridSearchError(f"Every {family.value} grid cell failed: {listing}")

    logger.info(
        "Grid search finished",
        family=family.value,
        cells=len(cells),
        best=_grid_values(grid, best.params),
        mean_f1=best.mean_f1,
    )
    return GridSearchResult(best=best.params, best_reports=best.reports, cells=results)


def _grid_values(grid: GridSpec, params: Hyperparams) -> dict[str, Any]:
    return {name: getattr(params, name) for name in grid.grid}


@final
@dataclass(frozen=True)
class HeldoutEvaluation:
    metrics: MetricSet
    confusion: np.ndarray
    pipeline: Pipeline


def evaluate_heldout(
    family: Family,
    best: Hyperparams,
    train: FeatureMatrix,
    test: FeatureMatrix,
    n_jobs: int = 1,
) -> HeldoutEvaluation:
    """One refit on all of `train`, one evaluation on `test`."""
    pipeline = fit_pipeline(family, train, best, n_jobs=n_jobs)
    y_true = binary_targets(test)
    scores = pipeline.predict_proba(test)
    metrics = compute_metrics(y_true, scores)
    confusion = confusion_counts(y_true, (scores >= DEFAULT_THRESHOLD).astype(np.int64))
    logger.info("Held-out evaluation", family=family.value, test_size=test.n_samples, f1=metrics.f1)
    return HeldoutEvaluation(metrics=metrics, confusion=confusion, pipeline=pipeline)


@final
@dataclass(frozen=True)
class OofResult:
    scores: np.ndarray
    """Out-of-fold PD probability per row of the input matrix."""
    reports: list[FoldReport]
    counts: np.ndarray

    @property
    def normalized(self) -> np.ndarray:
        return normalize_confusion(self.counts)


def oof_predictions(
    family: Family,
    params: Hyperparams,
    matrix: FeatureMatrix,
    plan: SplitPlan,
    n_jobs: int = 1,
) -> OofResult:
    folds = stratified_kfold(matrix, plan)

    def run(index: int) -> tuple[FoldReport, np.ndarray]:
        return evaluate_fold(family, params, matrix, folds[index], index)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            outcomes = list(pool.map(run, range(len(folds))))
    else:
        outcomes = [run(i) for i in range(len(folds))]

    scores = np.full(matrix.n_samples, np.nan)
    for (_, valid_idx), (_, fold_scores) in zip(folds, outcomes):
        scores[valid_idx] = fold_scores
    y_true = binary_targets(matrix)
    counts = confusion_counts(y_true, (scores >= DEFAULT_THRESHOLD).astype(np.int64))
    return OofResult(scores=scores, reports=[report for report, _ in outcomes], counts=counts)


def oof_confusion(
    family: Family,
    params: Hyperparams,
    matrix: FeatureMatrix,
    plan: SplitPlan,
    n_jobs: int = 1,
) -> np.ndarray:
    """Row-normalized confusion of out-of-fold predictions (rows: true HC, true PD)."""
    return oof_predictions(family, params, matrix, plan, n_jobs).normalized
