from pathlib import Path
from typing import Any

from tomli_w import dumps as dumps  # pylint: disable=unused-import

try:
    from tomli import loads as loads  # pylint: disable=unused-import
except ImportError:
    from tomllib import loads as loads  # type: ignore


def load_path(path: Path) -> dict[str, Any]:
    return loads(path.read_text(encoding="utf-8"))


def dump_path(path: Path, obj: dict[str, Any]):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj), encoding="utf-8")


def parse_literal(raw: str) -> Any:
    """
    Parse a single toml value literal, as used by `--env.bandits 2` style command
    line overrides. Anything that is not a valid literal is taken as a bare string.
    """

    try:
        return loads(f"value = {raw}")["value"]
    except ValueError:
        return raw
