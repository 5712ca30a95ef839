import sys
from argparse import ArgumentParser

from rich.markup import escape

from ..config import main as config
from ..errors import MufasaError
from ..log import LOG
from . import ntk, run


def main(argv: list[str] | None = None):
    parser = ArgumentParser(prog="mufasa", description="Multi-facet contextual bandit experiments")

    subparsers = parser.add_subparsers(required=True)
    run.register_run_args(subparsers.add_parser)
    run.register_compare_args(subparsers.add_parser)
    ntk.register_args(subparsers.add_parser)
    config.register_args(subparsers.add_parser)

    args = parser.parse_args(argv)

    try:
        args.entrypoint(args)
    except MufasaError as exc:
        LOG.console.print(f"[red]error[/red]: {escape(str(exc))}")
        sys.exit(1)
