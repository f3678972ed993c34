from typing import Annotated

import typer

from app.commands.options import ConfigOption, OutOption, SeedOption, reports_errors, run_settings
from app.internal.scoring.battery import load_battery
from app.internal.synth.cohort import generate_cohort, write_responses
from app.util.io import ensure_dir


@reports_errors
def synth(
    config: ConfigOption = None,
    seed: SeedOption = None,
    out: OutOption = None,
    n_pd: Annotated[int | None, typer.Option("--n-pd", min=1, help="PD participants.")] = None,
    n_hc: Annotated[int | None, typer.Option("--n-hc", min=1, help="HC participants.")] = None,
):
    """Generate a synthetic cohort in the raw response format."""
    sizes = {k: v for k, v in {"n_pd": n_pd, "n_hc": n_hc}.items() if v is not None}
    settings = run_settings(config, seed=seed, out=out, synth=sizes)
    battery = load_battery(settings.paths.instruments)
    records = generate_cohort(settings.synth.plan(settings.app.seed), battery.instruments)
    ensure_dir(settings.paths.output_dir)
    target = settings.paths.responses_path()
    ensure_dir(target.parent)
    write_responses(records, target)
