from argparse import ArgumentParser, Namespace, RawTextHelpFormatter
from pathlib import Path
from typing import Callable

from rich.console import Console
from rich.table import Table

from .. import runner
from ..log import LOG
from ..runlog import RunLog
from .common import add_common_options, parse_config_from_cli


def register_run_args(make_parser: Callable[..., ArgumentParser]):
    parser = make_parser("run", formatter_class=RawTextHelpFormatter, help="run one agent over all seeds")
    parser.set_defaults(entrypoint=main_run)
    add_common_options(parser, config_positional=True)


def register_compare_args(make_parser: Callable[..., ArgumentParser]):
    parser = make_parser(
        "compare", formatter_class=RawTextHelpFormatter, help="run all `run.agents` on the same environment and seeds"
    )
    parser.set_defaults(entrypoint=main_compare)
    add_common_options(parser, config_positional=True)


def print_summary(logs_by_agent: dict[str, list[RunLog]], outdir: Path):
    table = Table(
        "agent",
        "seeds",
        "mean cum. regret",
        "std",
        title=f"final cumulative regret ({outdir})",
        title_justify="left",
    )
    for agent, mean, std in runner.summary_rows(logs_by_agent):
        table.add_row(agent, str(len(logs_by_agent[agent])), f"{mean:.4f}", f"{std:.4f}")
    Console().print(table)

    for counter, count in sorted(LOG.counters.items()):
        LOG.info(f"{counter}: {count} warnings")


def main_run(args: Namespace):
    cfg = parse_config_from_cli(args).validate()
    assert cfg.agent.kind is not None and cfg.run.outdir is not None
    logs = runner.run(cfg)
    print_summary({cfg.agent.kind: logs}, Path(cfg.run.outdir))


def main_compare(args: Namespace):
    cfg = parse_config_from_cli(args).validate()
    assert cfg.run.outdir is not None
    print_summary(runner.compare(cfg), Path(cfg.run.outdir))
