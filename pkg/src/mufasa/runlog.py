"""
Per-run logs.

A run of one agent with one seed produces three files in the output
directory:

- `<agent>_<seed>.csv`, one row per round with the fixed columns in `COLUMNS`,
- `<agent>_<seed>.detail.csv`, the model prediction, the confidence terms and
  the per-bandit regret of every round,
- `<agent>_<seed>.meta.toml`, the configuration snapshot, the seed and the
  random generator in use.

Floats are written with their shortest round-trip representation, so
identical runs produce byte-identical files.
"""

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, TextIO

from . import toml
from .errors import ParseError
from .seeding import RNG_ALGORITHM

COLUMNS = ("t", "choice", "R", "H_clean", "H_star", "regret", "cum_regret", "ucb_width", "branch")


@dataclass(frozen=True)
class RoundRecord:
    # pylint: disable=too-many-instance-attributes

    t: int
    choice: tuple[int, ...]
    final_reward: float
    h_clean: float | None
    h_star: float | None
    regret: float | None
    cum_regret: float | None
    ucb_width: float
    branch: str
    predicted: float = 0.0
    ucb_per_bandit: tuple[float, ...] = ()
    ucb_shared: float = 0.0
    bandit_regret: tuple[float, ...] = ()


@dataclass
class RunLog:
    agent: str
    seed: int
    records: list[RoundRecord] = field(default_factory=list)
    config: dict[str, Any] = field(default_factory=dict)

    def append(self, record: RoundRecord):
        self.records.append(record)

    @property
    def cum_regret(self) -> float | None:
        if not self.records:
            return 0.0
        return self.records[-1].cum_regret

    def stem(self) -> str:
        return f"{self.agent}_{self.seed}"

    def write(self, outdir: Path) -> Path:
        outdir.mkdir(parents=True, exist_ok=True)
        path = outdir / f"{self.stem()}.csv"
        with path.open("w", newline="", encoding="utf-8") as file:
            write_records(file, self.records)
        with (outdir / f"{self.stem()}.detail.csv").open("w", newline="", encoding="utf-8") as file:
            write_details(file, self.records)
        toml.dump_path(
            outdir / f"{self.stem()}.meta.toml",
            {"agent": self.agent, "seed": self.seed, "rng": RNG_ALGORITHM, "config": self.config},
        )
        return path

    @staticmethod
    def read(path: Path) -> "RunLog":
        """Read a run log, merging the detail and metadata files when they exist."""

        stem = path.name.removesuffix(".csv")
        records = read_records(path)

        detail_path = path.with_name(f"{stem}.detail.csv")
        if detail_path.exists():
            records = merge_details(detail_path, records)

        agent, _, seed = stem.rpartition("_")
        config: dict[str, Any] = {}
        meta_path = path.with_name(f"{stem}.meta.toml")
        if meta_path.exists():
            meta = toml.load_path(meta_path)
            agent = str(meta.get("agent", agent))
            seed = str(meta.get("seed", seed))
            config = meta.get("config", {})

        try:
            seed_value = int(seed)
        except ValueError:
            seed_value = 0
        return RunLog(agent or stem, seed_value, records, config)


def fmt_float(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def _parse_float(path: Path, line: int, column: str, cell: str) -> float | None:
    if cell == "":
        return None
    try:
        return float(cell)
    except ValueError as exc:
        raise ParseError(path, line, f"column {column}: {cell!r} is not a number") from exc


def write_records(file: TextIO, records: list[RoundRecord]):
    writer = csv.writer(file, lineterminator="\n")
    writer.writerow(COLUMNS)
    for r in records:
        writer.writerow(
            [
                r.t,
                "-".join(map(str, r.choice)),
                fmt_float(r.final_reward),
                fmt_float(r.h_clean),
                fmt_float(r.h_star),
                fmt_float(r.regret),
                fmt_float(r.cum_regret),
                fmt_float(r.ucb_width),
                r.branch,
            ]
        )


def detail_columns(n_bandits: int) -> list[str]:
    return [
        "t",
        "predicted",
        "ucb_shared",
        *[f"ucb_b{k}" for k in range(n_bandits)],
        *[f"regret_b{k}" for k in range(n_bandits)],
    ]


def write_details(file: TextIO, records: list[RoundRecord]):
    n_bandits = len(records[0].choice) if records else 0
    writer = csv.writer(file, lineterminator="\n")
    writer.writerow(detail_columns(n_bandits))
    for r in records:
        per_bandit = r.ucb_per_bandit or (0.0,) * n_bandits
        regrets = [fmt_float(v) for v in r.bandit_regret] or [""] * n_bandits
        writer.writerow(
            [r.t, fmt_float(r.predicted), fmt_float(r.ucb_shared), *map(fmt_float, per_bandit), *regrets]
        )


def read_records(path: Path) -> list[RoundRecord]:
    with path.open(newline="", encoding="utf-8") as file:
        rows = list(csv.reader(file))

    if not rows or tuple(rows[0]) != COLUMNS:
        raise ParseError(path, 1, f"expected header {','.join(COLUMNS)}")

    records: list[RoundRecord] = []
    for line, row in enumerate(rows[1:], start=2):
        if len(row) != len(COLUMNS):
            raise ParseError(path, line, f"expected {len(COLUMNS)} cells, got {len(row)}")
        cells = dict(zip(COLUMNS, row))
        try:
            t = int(cells["t"])
            choice = tuple(int(i) for i in cells["choice"].split("-"))
        except ValueError as exc:
            raise ParseError(path, line, f"malformed round or choice ({exc})") from exc

        final_reward = _parse_float(path, line, "R", cells["R"])
        if final_reward is None:
            raise ParseError(path, line, "missing final reward")
        records.append(
            RoundRecord(
                t=t,
                choice=choice,
                final_reward=final_reward,
                h_clean=_parse_float(path, line, "H_clean", cells["H_clean"]),
                h_star=_parse_float(path, line, "H_star", cells["H_star"]),
                regret=_parse_float(path, line, "regret", cells["regret"]),
                cum_regret=_parse_float(path, line, "cum_regret", cells["cum_regret"]),
                ucb_width=_parse_float(path, line, "ucb_width", cells["ucb_width"]) or 0.0,
                branch=cells["branch"],
            )
        )
    return records


def merge_details(path: Path, records: list[RoundRecord]) -> list[RoundRecord]:
    with path.open(newline="", encoding="utf-8") as file:
        rows = list(csv.reader(file))

    n_bandits = len(records[0].choice) if records else 0
    if not rows or rows[0] != detail_columns(n_bandits):
        raise ParseError(path, 1, "unexpected detail header")
    if len(rows) - 1 != len(records):
        raise ParseError(path, len(rows), f"detail file has {len(rows) - 1} rounds, log has {len(records)}")

    merged: list[RoundRecord] = []
    for line, (row, record) in enumerate(zip(rows[1:], records), start=2):
        values = [_parse_float(path, line, column, cell) for column, cell in zip(rows[0], row)]
        per_bandit = tuple(v or 0.0 for v in values[3 : 3 + n_bandits])
        regrets = values[3 + n_bandits :]
        merged.append(
            RoundRecord(
                **{
                    **record.__dict__,
                    "predicted": values[1] or 0.0,
                    "ucb_shared": values[2] or 0.0,
                    "ucb_per_bandit": per_bandit,
                    "bandit_regret": tuple(v for v in regrets if v is not None),
                }
            )
        )
    return merged
