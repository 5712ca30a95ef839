from argparse import ArgumentParser, Namespace
from pathlib import Path

from .. import toml
from ..config import Config
from ..log import LOG


def _dest(dotted: str) -> str:
    return "override__" + dotted.replace(".", "__")


def add_common_options(parser: ArgumentParser, *, config_positional: bool = False):
    if config_positional:
        parser.add_argument("config", type=Path, help="Path to a run config file")
    else:
        parser.add_argument("--config", type=Path, help="Path to a run config file")
    parser.add_argument("--profile", help="Base profile of the config")
    parser.add_argument("-v", "--verbose", action="store_true", help="Show debug output and repeated warnings")

    group = parser.add_argument_group("config options", "Any setting, given as a toml literal (`--env.dim 4`).")
    for dotted, field in Config.get_fields().items():
        group.add_argument(
            f"--{dotted}",
            dest=_dest(dotted),
            metavar=field.validated_ty.generic_string().upper(),
            help=field.description.split("\n\n")[0],
        )


def parse_config_from_cli(args: Namespace) -> Config:
    if getattr(args, "verbose", False):
        LOG.debug_enabled = True

    config = Config()
    if args.config:
        config = Config.parse_config(path=args.config)

    if args.profile:
        config.profile = args.profile

    for dotted in Config.get_fields():
        raw = getattr(args, _dest(dotted), None)
        if raw is not None:
            config.set(dotted, toml.parse_literal(raw))

    return config
