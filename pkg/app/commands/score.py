from app.commands.options import ConfigOption, DatasetOption, OutOption, reports_errors, run_settings
from app.internal.dataset.cleaning import cohort_counts, drop_missing, filter_cohorts
from app.internal.scoring.battery import build_feature_matrix, load_battery, read_responses
from app.util.io import ensure_dir, require_artifact, write_feature_matrix
from app.util.log import logger


@reports_errors
def score(
    config: ConfigOption = None,
    dataset: DatasetOption = None,
    out: OutOption = None,
):
    """Score raw responses into a cleaned feature matrix for one dataset."""
    settings = run_settings(config, dataset=dataset, out=out)
    selection = settings.models.dataset
    battery = load_battery(settings.paths.instruments)
    records = read_responses(require_artifact(settings.paths.responses_path(), "synth"))

    matrix = build_feature_matrix(battery, records, selection)
    matrix = filter_cohorts(matrix, settings.cleaning.cohorts)
    matrix = drop_missing(matrix, settings.cleaning.max_feature_missing(matrix.n_samples))
    logger.info("Cohort after cleaning", dataset=selection.value, **cohort_counts(matrix))

    output_dir = ensure_dir(settings.paths.output_dir)
    write_feature_matrix(matrix, output_dir / f"features_{selection.value}.csv")
