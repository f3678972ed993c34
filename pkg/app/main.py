import typer

from app.commands import explain, report, score, synth, train_eval

cli = typer.Typer(
    name="scope-pd",
    help="Score survey batteries, train PD vs HC classifiers and explain them with exact tree Shapley values.",
    no_args_is_help=True,
    pretty_exceptions_enable=False,
)

cli.command("synth")(synth.synth)
cli.command("score")(score.score)
cli.command("train-eval")(train_eval.train_eval)
cli.command("explain")(explain.explain)
cli.command("report")(report.report)


if __name__ == "__main__":
    cli()
