from argparse import SUPPRESS, ArgumentParser, Namespace, RawTextHelpFormatter
from pathlib import Path
from typing import Callable

from ..cli.common import add_common_options, parse_config_from_cli
from ..log import LOG


def register_args(make_parser: Callable[..., ArgumentParser]):
    parser = make_parser(
        "config",
        formatter_class=RawTextHelpFormatter,
        help="check a run config, or show its effective settings",
        description=(
            "Validate the effective config and build its environment without playing a round.\n"
            "With --show or --show-format, print the effective settings instead."
        ),
    )
    parser.set_defaults(entrypoint=main)
    parser.add_argument("--show", action="store_true", help="show effective config (plain unless --show-format)")
    parser.add_argument("--show-format", choices=["plain", "json", "toml"], help="show effective config in this format")
    parser.add_argument("--gen-docs", type=Path, help=SUPPRESS)
    add_common_options(parser)


def main(args: Namespace):
    if args.gen_docs:
        from .gen_docs import generate_docs  # pylint:disable=import-outside-toplevel

        generate_docs(args.gen_docs)
        return

    validated = parse_config_from_cli(args).validate()

    if args.show or args.show_format:
        from .show import fmt_config  # pylint:disable=import-outside-toplevel

        print(fmt_config(validated, args.show_format or "plain"))
        return

    from ..runner import build_env_spec  # pylint:disable=import-outside-toplevel

    env_spec = build_env_spec(validated)
    assert validated.run.rounds is not None and validated.run.seeds is not None
    LOG.info(
        f"config ok: profile {validated.profile}, {env_spec.n_bandits} bandits ({env_spec.final}, C̄ = "
        f"{env_spec.effective_c_bar:g}), agents {', '.join(validated.agent_kinds())}, "
        f"{validated.run.rounds} rounds x {len(validated.run.seeds)} seeds"
    )
