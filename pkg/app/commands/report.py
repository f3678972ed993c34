import pandas as pd
import typer

from app.commands.options import ConfigOption, OutOption, reports_errors, run_settings
from app.internal.errors import ArtifactMissingError
from app.internal.evaluation.report import read_metrics_csv, render_tables
from app.util.io import ensure_dir
from app.util.log import logger


@reports_errors
def report(
    config: ConfigOption = None,
    out: OutOption = None,
):
    """Re-render the metric tables from every metrics CSV in the output directory."""
    settings = run_settings(config, out=out)
    output_dir = ensure_dir(settings.paths.output_dir)
    paths = sorted(output_dir.glob("metrics_*.csv"))
    if not paths:
        raise ArtifactMissingError(
            f"No metrics CSV in {output_dir}. Run `scope-pd train-eval` first"
        )
    frame = pd.concat([read_metrics_csv(path) for path in paths], ignore_index=True)
    for dataset in frame["dataset"].drop_duplicates():
        table = render_tables(frame, str(dataset))
        (output_dir / f"table_{dataset}.txt").write_text(table)
        typer.echo(table)
    logger.info("Rendered tables", sources=[p.name for p in paths])
