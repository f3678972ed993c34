from concurrent.futures import ThreadPoolExecutor
from typing import Annotated

import numpy as np
import typer

from app.commands.options import (
    ConfigOption,
    DatasetOption,
    ModelOption,
    OutOption,
    TopKOption,
    reports_errors,
    run_settings,
)
from app.internal.classifiers.artifact import ModelArtifact, artifact_path
from app.internal.classifiers.ensemble import TreeEnsemble
from app.internal.dataset.normalize import apply_minmax
from app.internal.env_settings import ExplainScope
from app.internal.errors import ConfigurationError
from app.internal.explain.aggregate import Waterfall, global_contributions, local_waterfall
from app.internal.explain.treeshap import Attribution, treeshap_batch
from app.internal.models import CohortLabel, FeatureMatrix
from app.util.charts import stacked_bar_view, waterfall_view
from app.util.io import ensure_dir, read_feature_matrix, write_jsonl, write_rows
from app.util.log import logger
from app.util.templates import render_svg

BATCH_SIZE = 256


def explain_matrix(ensemble: TreeEnsemble, matrix: FeatureMatrix, n_jobs: int) -> list[Attribution]:
    """Attributions for every row, computed in batches that may run on a thread pool."""
    starts = range(0, matrix.n_samples, BATCH_SIZE)

    def run(start: int) -> list[Attribution]:
        rows = np.arange(start, min(start + BATCH_SIZE, matrix.n_samples))
        return treeshap_batch(
            ensemble,
            matrix.values[rows],
            [matrix.participant_ids[i] for i in rows],
            [matrix.labels[i] for i in rows],
        )

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            batches = list(pool.map(run, starts))
    else:
        batches = [run(start) for start in starts]
    return [attribution for batch in batches for attribution in batch]


def waterfall_rows(waterfall: Waterfall) -> list[dict[str, object]]:
    rows: list[dict[str, object]] = [
        {"term": "baseline", "feature": "", "contribution": waterfall.base_value, "cumulative": waterfall.base_value}
    ]
    running = waterfall.base_value
    for rank, step in enumerate(waterfall.steps, start=1):
        running += step.contribution
        rows.append(
            {"term": str(rank), "feature": step.feature_name, "contribution": step.contribution, "cumulative": running}
        )
    if waterfall.n_remaining:
        running += waterfall.remainder
        rows.append(
            {
                "term": "remainder",
                "feature": f"{waterfall.n_remaining} other features",
                "contribution": waterfall.remainder,
                "cumulative": running,
            }
        )
    rows.append({"term": "prediction", "feature": "", "contribution": waterfall.prediction, "cumulative": running})
    return rows


def pick_participants(matrix: FeatureMatrix, requested: list[str]) -> list[str]:
    if requested:
        unknown = [pid for pid in requested if pid not in matrix.participant_ids]
        if unknown:
            raise ConfigurationError(f"Participants not in the explained rows: {unknown}")
        return requested
    for pid, label in zip(matrix.participant_ids, matrix.labels):
        if label == CohortLabel.PD:
            return [pid]
    return list(matrix.participant_ids[:1])


@reports_errors
def explain(
    config: ConfigOption = None,
    dataset: DatasetOption = None,
    out: OutOption = None,
    model: ModelOption = None,
    top_k: TopKOption = None,
    scope: Annotated[ExplainScope | None, typer.Option("--scope", help="Explain the whole cohort or only the held-out split.")] = None,
    participant: Annotated[list[str] | None, typer.Option("--participant", help="Participant to draw a waterfall for. Repeatable.")] = None,
):
    """Exact Shapley attributions, global contributions and waterfalls for a trained tree model."""
    explain_overrides: dict[str, object] = {}
    if model is not None:
        if len(model.families()) != 1:
            raise ConfigurationError("explain works on one model at a time; pick rf or gbm")
        explain_overrides["model"] = model.families()[0]
    if top_k is not None:
        explain_overrides["top_k"] = top_k
    if scope is not None:
        explain_overrides["scope"] = scope
    if participant:
        explain_overrides["participants"] = participant
    settings = run_settings(config, dataset=dataset, out=out, explain=explain_overrides)
    selection = settings.models.dataset
    family = settings.explain.model
    output_dir = ensure_dir(settings.paths.output_dir)

    artifact = ModelArtifact.load(artifact_path(output_dir, family, selection))
    ensemble = artifact.tree_ensemble()
    matrix = read_feature_matrix(output_dir / f"features_{selection.value}.csv")
    if settings.explain.scope == ExplainScope.test:
        held_out = set(artifact.test_ids)
        matrix = matrix.take([i for i, pid in enumerate(matrix.participant_ids) if pid in held_out])
    scaled = apply_minmax(artifact.normalization, matrix)

    attributions = explain_matrix(ensemble, scaled, settings.app.n_jobs)
    worst_gap = max((a.additivity_gap() for a in attributions), default=0.0)
    logger.info(
        "Explained samples",
        model=family.value,
        dataset=selection.value,
        scope=settings.explain.scope.value,
        samples=len(attributions),
        output_space=ensemble.output_space,
        max_additivity_gap=worst_gap,
    )
    stem = f"{family.value}_{selection.value}"
    write_jsonl(attributions, output_dir / f"attributions_{stem}.jsonl")

    ranked = global_contributions(attributions)
    write_rows(
        [
            {"rank": rank, "feature": c.feature_name, "mean_abs_hc": c.mean_abs_hc, "mean_abs_pd": c.mean_abs_pd, "total": c.total}
            for rank, c in enumerate(ranked, start=1)
        ],
        output_dir / f"global_{stem}.csv",
    )
    top_k_value = settings.explain.top_k
    render_svg(
        "global.svg.j2",
        output_dir / f"global_{stem}.svg",
        stacked_bar_view(f"{family.value.upper()} {selection.value}: top {top_k_value} features", ranked[:top_k_value]),
    )

    by_id = {a.participant_id: a for a in attributions}
    for pid in pick_participants(scaled, settings.explain.participants):
        waterfall = local_waterfall(by_id[pid], top_k_value)
        write_rows(waterfall_rows(waterfall), output_dir / f"waterfall_{stem}_{pid}.csv")
        render_svg(
            "waterfall.svg.j2",
            output_dir / f"waterfall_{stem}_{pid}.svg",
            waterfall_view(f"{pid}: {family.value.upper()} {selection.value}", waterfall),
        )
    logger.info("Wrote explanations", output_dir=str(output_dir), top=[c.feature_name for c in ranked[:3]])
