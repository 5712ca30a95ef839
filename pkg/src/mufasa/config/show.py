import json
from typing import Any

from .. import toml
from . import Config


def fmt_config_dict(config: Config) -> dict[str, Any]:
    """
    The set fields of a config as nested tables. Per-bandit settings given as a
    single value stay single values.
    """

    out: dict[str, Any] = {}
    if config.profile is not None:
        out["profile"] = config.profile

    for name, section in config.sections().items():
        table: dict[str, Any] = {}
        for field_name in section.get_fields():
            val = section.get(field_name)
            if val is None:
                continue
            table[field_name] = list(val) if isinstance(val, list) else val
        if table:
            out[name] = table

    return out


def fmt_config(config: Config, show_format: str) -> str:
    out = fmt_config_dict(config)

    ret = ""
    if show_format == "plain":
        for section, table in out.items():
            if not isinstance(table, dict):
                ret += f"{section}={table}\n"
                continue
            for field, raw in table.items():
                ret += f"{section}.{field}={raw}\n"
    elif show_format == "json":
        ret = json.dumps(out, indent=4)
    elif show_format == "toml":
        ret = toml.dumps(out)

    return ret.strip()
