"""
Run Command
========================
Runs scenario files and writes one JSON report per task.

Features:
- Several scenario files per call, in parallel processes with --jobs
- --mesh and --tol override the scenario [options] section
- --trace writes plot-data CSVs next to the reports
- Exit code is the worst outcome over all scenarios (1 before 2 before 0)
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from typing import List

import click
from tabulate import tabulate

from app.core.config import OUTPUT_DIR
from app.schemas.scenario import TraceKind
from app.services.scenario_runner import RunOutcome, run_scenario_file

logger = logging.getLogger(__name__)


def _exit_code(outcomes: List[RunOutcome]) -> int:
    codes = {o.exit_code for o in outcomes}
    for code in (1, 2):
        if code in codes:
            return code
    return 0


@click.command("run")
@click.argument("scenarios", nargs=-1, required=True, type=click.Path(dir_okay=False))
@click.option("--out", "output_dir", default=OUTPUT_DIR, show_default=True, type=click.Path(file_okay=False),
              help="Directory for JSON reports and CSV traces.")
@click.option("--mesh", type=click.IntRange(min=8), default=None, help="Finite element mesh; refinements use 2N and 4N.")
@click.option("--tol", type=click.FloatRange(min=0.0, min_open=True), default=None, help="Inertia and rank tolerance.")
@click.option("--trace", "traces", multiple=True, type=click.Choice([k.value for k in TraceKind]),
              help="Trace to emit; may be repeated.")
@click.option("--jobs", type=click.IntRange(min=1), default=1, show_default=True, help="Scenarios run in parallel.")
def run(scenarios, output_dir, mesh, tol, traces, jobs):
    """Run SCENARIOS and write their reports to --out."""
    job = partial(run_scenario_file, output_dir=output_dir, mesh=mesh, tol=tol, traces=traces)
    if jobs > 1 and len(scenarios) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(job, scenarios))
    else:
        outcomes = [job(path) for path in scenarios]

    rows = [row for outcome in outcomes for row in outcome.rows()]
    click.echo(tabulate(rows, headers=["scenario", "task", "status", "details"], tablefmt="simple"))
    for outcome in outcomes:
        for path in outcome.traces:
            click.echo(f"trace: {path}")

    code = _exit_code(outcomes)
    logger.info(f"Ran {len(outcomes)} scenario(s), exit code {code}")
    raise SystemExit(code)
