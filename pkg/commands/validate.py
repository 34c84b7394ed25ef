import click
from tabulate import tabulate

from app.schemas.scenario import ScenarioError, load_scenario


@click.command("validate")
@click.argument("scenario", type=click.Path(dir_okay=False))
def validate(scenario):
    """Parse SCENARIO and print its task table without running it."""
    try:
        parsed = load_scenario(scenario)
    except ScenarioError as e:
        click.echo(f"error: {e}", err=True)
        raise SystemExit(1)

    kind = "system" if parsed.system is not None else f"manifold {parsed.manifold.kind.value}"
    click.echo(f"{parsed.name}: {kind}")
    rows = [[i + 1, task.value, ", ".join(sorted(parsed.expected)) or "-"] for i, task in enumerate(parsed.tasks)]
    click.echo(tabulate(rows, headers=["#", "task", "expected keys"], tablefmt="simple"))
