import logging

import click

from app.core.config import LOG_LEVEL
from commands.run import run
from commands.validate import validate


@click.group()
@click.option("--log-level", default=LOG_LEVEL, show_default=True,
              type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False))
def cli(log_level):
    """Maslov index and index theorem toolkit for symplectic systems."""
    logging.basicConfig(level=log_level.upper(), format="%(asctime)s %(levelname)s %(name)s: %(message)s")


cli.add_command(run)
cli.add_command(validate)


if __name__ == "__main__":
    cli()
