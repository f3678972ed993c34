from enum import Enum
from pathlib import Path
from typing import Self

import numpy as np
import pandas as pd
from pydantic import BaseModel, model_validator
from terminaltables import AsciiTable

from app.internal.evaluation.metrics import METRIC_NAMES, MetricSet

TABLE_HEADERS = ["Model", "Accuracy", "Precision", "Recall", "F1", "ROC AUC", "PR AUC"]
METRIC_CSV_COLUMNS = ["model", "dataset", "source", "fold", *METRIC_NAMES]


class MetricSource(str, Enum):
    cv = "cv"
    """Validation folds of the selected grid cell."""
    oof = "oof"
    """Folds of the out-of-fold run on the whole cohort."""
    heldout = "heldout"
    """The single evaluation on the held-out test split."""


SOURCE_TITLES = {
    MetricSource.cv: "tuning folds of the selected grid cell",
    MetricSource.oof: "out-of-fold, whole cohort",
    MetricSource.heldout: "held-out test split",
}


class FoldReport(BaseModel, frozen=True):
    fold_index: int
    metrics: MetricSet
    confusion: list[list[int]]

    @model_validator(mode="after")
    def _check_confusion(self) -> Self:
        if len(self.confusion) != 2 or any(len(row) != 2 for row in self.confusion):
            raise ValueError("confusion must be a 2x2 matrix")
        return self


class MetricStat(BaseModel, frozen=True):
    mean: float | None
    std: float | None

    def formatted(self) -> str:
        return format_mean_std(self.mean, self.std)


def format_mean_std(mean: float | None, std: float | None) -> str:
    if mean is None:
        return "n/a"
    if std is None:
        return f"{mean:.4f}"
    return f"{mean:.4f} ± {std:.4f}"


def aggregate_folds(reports: list[FoldReport]) -> dict[str, MetricStat]:
    """Mean and sample standard deviation (n - 1) of every metric across folds."""
    if len(reports) < 2:
        raise ValueError(f"Aggregation needs at least 2 fold reports, got {len(reports)}")
    summary: dict[str, MetricStat] = {}
    for name in METRIC_NAMES:
        values = [v for r in reports if (v := r.metrics.value(name)) is not None]
        if not values:
            summary[name] = MetricStat(mean=None, std=None)
            continue
        std = float(np.std(values, ddof=1)) if len(values) > 1 else None
        summary[name] = MetricStat(mean=float(np.mean(values)), std=std)
    return summary


def metric_rows(
    model: str, dataset: str, source: MetricSource, reports: list[FoldReport]
) -> list[dict[str, object]]:
    """One row per fold, plus `mean` and `std` rows when there is more than one fold."""
    base = {"model": model, "dataset": dataset, "source": source.value}
    rows: list[dict[str, object]] = [
        base | {"fold": str(r.fold_index)} | r.metrics.model_dump() for r in reports
    ]
    if len(reports) > 1:
        summary = aggregate_folds(reports)
        rows.append(base | {"fold": "mean"} | {k: s.mean for k, s in summary.items()})
        rows.append(base | {"fold": "std"} | {k: s.std for k, s in summary.items()})
    return rows


def write_metrics_csv(rows: list[dict[str, object]], path: Path):
    frame = pd.DataFrame(rows, columns=METRIC_CSV_COLUMNS)
    frame.to_csv(path, index=False, float_format="%.10f")


def read_metrics_csv(path: Path) -> pd.DataFrame:
    return pd.read_csv(path, dtype={"model": str, "dataset": str, "source": str, "fold": str})


def summaries_from_frame(
    frame: pd.DataFrame, source: MetricSource
) -> dict[str, dict[str, MetricStat]]:
    """Rebuild per-model mean/std summaries from the aggregate rows of a metrics CSV."""
    selected = frame[frame["source"] == source.value]
    summaries: dict[str, dict[str, MetricStat]] = {}
    for model, group in selected.groupby("model", sort=False):
        by_fold = {str(f): row for f, row in zip(group["fold"], group.to_dict("records"))}
        if "mean" in by_fold:
            mean_row = by_fold["mean"]
            std_row = by_fold.get("std", {})
        else:
            # a single heldout row
            mean_row = next(iter(by_fold.values()))
            std_row = {}
        summaries[str(model)] = {
            name: MetricStat(mean=_number(mean_row.get(name)), std=_number(std_row.get(name)))
            for name in METRIC_NAMES
        }
    return summaries


def _number(value: object) -> float | None:
    if value is None or pd.isna(value):  # pyright: ignore[reportArgumentType]
        return None
    return float(value)  # pyright: ignore[reportArgumentType]


def render_table(title: str, summaries: dict[str, dict[str, MetricStat]]) -> str:
    """Table of `mean ± std` cells, one row per model."""
    data = [TABLE_HEADERS]
    for model, summary in summaries.items():
        data.append([model.upper(), *(summary[name].formatted() for name in METRIC_NAMES)])
    table = AsciiTable(data, title)
    table.inner_row_border = False
    return table.table


def render_tables(frame: pd.DataFrame, dataset: str) -> str:
    """One table per metric source present in a metrics CSV."""
    tables: list[str] = []
    for source in MetricSource:
        summaries = summaries_from_frame(frame[frame["dataset"] == dataset], source)
        if summaries:
            tables.append(render_table(f" {dataset}: {SOURCE_TITLES[source]} ", summaries))
    return "\n\n".join(tables) + "\n"
