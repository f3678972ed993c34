from pathlib import Path

import numpy as np
import pandas as pd

from app.commands.options import (
    ConfigOption,
    DatasetOption,
    ModelOption,
    OutOption,
    SeedOption,
    reports_errors,
    run_settings,
)
from app.internal.classifiers.artifact import ModelArtifact, artifact_path
from app.internal.classifiers.families import Family
from app.internal.dataset.split import stratified_split
from app.internal.errors import ConfigurationError
from app.internal.evaluation.report import (
    METRIC_CSV_COLUMNS,
    FoldReport,
    MetricSource,
    metric_rows,
    render_tables,
    write_metrics_csv,
)
from app.internal.evaluation.search import (
    evaluate_heldout,
    grid_search_cv,
    load_grids,
    oof_predictions,
)
from app.internal.scoring.battery import DatasetSelection
from app.util.charts import confusion_view
from app.util.io import ensure_dir, read_feature_matrix
from app.util.log import logger
from app.util.templates import render_svg


def write_confusion(
    output_dir: Path, family: Family, dataset: DatasetSelection, normalized: np.ndarray, counts: np.ndarray
):
    stem = f"confusion_{family.value}_{dataset.value}"
    labels = ["HC", "PD"]
    rows = [
        {"true": labels[t], "predicted": labels[p], "fraction": normalized[t, p], "count": int(counts[t, p])}
        for t in range(2)
        for p in range(2)
    ]
    pd.DataFrame(rows).to_csv(output_dir / f"{stem}.csv", index=False, float_format="%.10f")
    render_svg(
        "confusion.svg.j2",
        output_dir / f"{stem}.svg",
        confusion_view(f"{family.value.upper()} {dataset.value}: out-of-fold confusion", normalized, counts),
    )


@reports_errors
def train_eval(
    config: ConfigOption = None,
    dataset: DatasetOption = None,
    seed: SeedOption = None,
    out: OutOption = None,
    model: ModelOption = None,
):
    """Grid-search, evaluate and save every requested classifier family."""
    overrides = {"families": model.families()} if model is not None else {}
    settings = run_settings(config, dataset=dataset, seed=seed, out=out, models=overrides)
    selection = settings.models.dataset
    output_dir = ensure_dir(settings.paths.output_dir)
    matrix = read_feature_matrix(output_dir / f"features_{selection.value}.csv")
    grids = load_grids(settings.paths.grids)
    missing_grids = [f.value for f in settings.models.families if f not in grids]
    if missing_grids:
        raise ConfigurationError(f"No hyperparameter grid configured for {missing_grids}")
    plan = settings.split_plan()
    n_jobs = settings.app.n_jobs

    train, test = stratified_split(matrix, plan)
    logger.info("Split cohort", train=train.n_samples, test=test.n_samples, dataset=selection.value)
    heldout_ids = list(test.participant_ids)

    rows: list[dict[str, object]] = []
    for family in settings.models.families:
        search = grid_search_cv(family, grids[family], train, plan, n_jobs=n_jobs)
        heldout = evaluate_heldout(family, search.best, train, test, n_jobs=n_jobs)
        oof = oof_predictions(family, search.best, matrix, plan, n_jobs=n_jobs)
        heldout_report = FoldReport(fold_index=0, metrics=heldout.metrics, confusion=heldout.confusion.tolist())

        rows += metric_rows(family.value, selection.value, MetricSource.cv, search.best_reports)
        rows += metric_rows(family.value, selection.value, MetricSource.oof, oof.reports)
        rows += metric_rows(family.value, selection.value, MetricSource.heldout, [heldout_report])

        write_confusion(output_dir, family, selection, oof.normalized, oof.counts)
        ModelArtifact.from_pipeline(heldout.pipeline, selection, heldout_ids).save(
            artifact_path(output_dir, family, selection)
        )
        # every family is fitted on the same training split, so the scaling is shared
        heldout.pipeline.normalization.save(output_dir / f"normalization_{selection.value}.json")
        logger.info(
            "Evaluated model",
            family=family.value,
            dataset=selection.value,
            heldout_accuracy=heldout.metrics.accuracy,
            oof_accuracy=float(np.mean([r.metrics.accuracy for r in oof.reports])),
        )

    write_metrics_csv(rows, output_dir / f"metrics_{selection.value}.csv")
    table = render_tables(pd.DataFrame(rows, columns=METRIC_CSV_COLUMNS), selection.value)
    (output_dir / f"table_{selection.value}.txt").write_text(table)
    logger.info("Wrote metrics", dataset=selection.value, output_dir=str(output_dir))
