"""
Classification data for the dataset environments.

Files are UTF-8 CSV with a header row `label,f0,f1,…` and one sample per
row. Features are rescaled by the largest row norm so every sample satisfies
‖x‖₂ ≤ 1.
"""

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParseError
from .tensor import Matrix, Vector


@dataclass(frozen=True)
class DatasetRound:
    features: Vector
    label: int


@dataclass(frozen=True)
class Dataset:
    rounds: tuple[DatasetRound, ...]
    n_classes: int

    @property
    def dim(self) -> int:
        return self.rounds[0].features.shape[0]

    def features(self) -> Matrix:
        return np.stack([r.features for r in self.rounds])

    def labels(self) -> list[int]:
        return [r.label for r in self.rounds]


def _parse_label(path: Path, line: int, cell: str) -> int:
    try:
        value = float(cell)
    except ValueError as exc:
        raise ParseError(path, line, f"label {cell!r} is not a number") from exc
    if not value.is_integer():
        raise ParseError(path, line, f"label {cell!r} is not an integer")
    return int(value)


def _read_rows(path: Path) -> list[list[str]]:
    # utf-8-sig drops a leading byte order mark
    try:
        with path.open(newline="", encoding="utf-8-sig") as file:
            return list(csv.reader(file))
    except UnicodeDecodeError as exc:
        raise ParseError(path, None, f"not valid UTF-8 ({exc.reason})") from exc


def ingest_csv(path: Path, n_classes: int | None = None) -> Dataset:
    """
    Read a labelled dataset. Without `n_classes`, the class count is one
    more than the largest label seen.
    """

    rows = _read_rows(path)

    if not rows:
        raise ParseError(path, 1, "file is empty")

    header = [cell.strip() for cell in rows[0]]
    if len(header) < 2 or header[0] != "label":
        raise ParseError(path, 1, "header must be `label,f0,f1,...`")
    dim = len(header) - 1

    labels: list[int] = []
    features: list[list[float]] = []
    lines: list[int] = []
    for line, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != dim + 1:
            raise ParseError(path, line, f"expected {dim + 1} cells, got {len(row)}")

        labels.append(_parse_label(path, line, row[0].strip()))
        try:
            features.append([float(cell) for cell in row[1:]])
        except ValueError as exc:
            raise ParseError(path, line, f"non-numeric feature ({exc})") from exc
        if not all(np.isfinite(features[-1])):
            raise ParseError(path, line, "features must be finite")
        lines.append(line)

    if not labels:
        raise ParseError(path, 2, "file contains no samples")

    classes = n_classes if n_classes is not None else max(labels) + 1
    for line, label in zip(lines, labels):
        if not 0 <= label < classes:
            raise ParseError(path, line, f"label {label} outside 0..{classes - 1}")

    matrix = np.array(features, dtype=np.float64)
    max_norm = float(np.max(np.linalg.norm(matrix, axis=1)))
    if max_norm > 0.0:
        matrix = matrix / max_norm

    return Dataset(tuple(DatasetRound(x, label) for x, label in zip(matrix, labels)), classes)


def block_arms(x: Vector, n_classes: int) -> Matrix:
    """One arm per class: arm c carries `x` in block c and zeros elsewhere."""

    dim = x.shape[0]
    arms = np.zeros((n_classes, n_classes * dim))
    for c in range(n_classes):
        arms[c, c * dim : (c + 1) * dim] = x
    return arms


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def read_contexts(path: Path) -> Matrix:
    """
    Read raw context vectors, one per row, without rescaling.

    A first row that is not numeric is taken as a header; a header starting
    with `label` marks a dataset file, whose label column is dropped.
    """

    rows = _read_rows(path)
    if not rows:
        raise ParseError(path, 1, "file is empty")

    start = 1
    skip = 0
    if all(_is_number(cell) for cell in rows[0]):
        start = 0
    elif rows[0][0].strip() == "label":
        skip = 1

    contexts: list[list[float]] = []
    width: int | None = None
    for line, row in enumerate(rows[start:], start=start + 1):
        if not row or all(not cell.strip() for cell in row):
            continue
        cells = row[skip:]
        if width is None:
            width = len(cells)
        if len(cells) != width or width == 0:
            raise ParseError(path, line, f"expected {width} values, got {len(cells)}")
        try:
            contexts.append([float(cell) for cell in cells])
        except ValueError as exc:
            raise ParseError(path, line, f"non-numeric value ({exc})") from exc
        if not all(np.isfinite(contexts[-1])):
            raise ParseError(path, line, "values must be finite")

    if not contexts:
        raise ParseError(path, start + 1, "file contains no contexts")
    return np.array(contexts, dtype=np.float64)
