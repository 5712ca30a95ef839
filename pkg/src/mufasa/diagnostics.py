"""
Post-hoc diagnostics: the infinite-width NTK of a set of contexts, the
effective dimension derived from it, regret accounting over run logs and the
empirical coverage of the logged confidence widths.
"""

from dataclasses import dataclass
from math import log, sqrt

import numpy as np
import numpy.typing as npt

from .errors import ContractViolation
from .runlog import RunLog
from .tensor import Matrix, Vector, as_matrix, log_det

NTK_JITTER = 1e-10


@dataclass(frozen=True)
class NtkResult:
    matrix: Matrix
    sigma_traces: tuple[float, ...]
    """trace of Σ^l for l = 0..L"""
    m_traces: tuple[float, ...]
    """trace of M^l for l = 0..L"""

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def jittered(self) -> Matrix:
        return self.matrix + NTK_JITTER * np.eye(self.size)

    def eigenvalues(self) -> Vector:
        """Eigenvalues in descending order."""

        return np.linalg.eigvalsh(self.matrix)[::-1]


def ntk_matrix(contexts: npt.ArrayLike, depth: int) -> NtkResult:
    """
    NTK of a depth-`depth` ReLU network over the given contexts.

    The Gaussian expectations of the layer recursion are evaluated with the
    arc-cosine kernel identities.
    """

    x = as_matrix(contexts)
    if depth < 1:
        raise ContractViolation(f"ntk_matrix: depth must be >= 1, got {depth}")
    norms = np.linalg.norm(x, axis=1)
    if np.any(norms == 0.0):
        raise ContractViolation(f"ntk_matrix: context {int(np.argmin(norms))} has zero norm")

    sigma = x @ x.T
    m = sigma.copy()
    sigma_traces = [float(np.trace(sigma))]
    m_traces = [float(np.trace(m))]

    for _ in range(depth):
        diag = np.diag(sigma)
        scale = np.sqrt(np.outer(diag, diag))
        # rounding can push the correlation just outside [-1, 1]
        theta = np.arccos(np.clip(sigma / scale, -1.0, 1.0))
        derivative = (np.pi - theta) / np.pi
        sigma = scale / np.pi * (np.sin(theta) + (np.pi - theta) * np.cos(theta))
        m = m * derivative + sigma
        sigma_traces.append(float(np.trace(sigma)))
        m_traces.append(float(np.trace(m)))

    matrix = (m + sigma) / 2.0
    matrix = (matrix + matrix.T) / 2.0
    return NtkResult(matrix, tuple(sigma_traces), tuple(m_traces))


def effective_dimension(m: npt.ArrayLike, t: int, lam: float) -> float:
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise ContractViolation(f"effective_dimension: matrix must be square, got {m.shape}")
    if lam <= 0 or t < 1:
        raise ContractViolation(f"effective_dimension: need lambda > 0 and T >= 1, got {lam} and {t}")
    return log_det(np.eye(m.shape[0]) + m / lam) / log(1.0 + t / lam)


def regret_bound(
    t: int, p_tilde: float, n_bandits: int, lam: float, delta: float, norm_bound: float, c_bar: float
) -> float:
    """
    High-probability cumulative regret bound of the assembled learner after
    `t` rounds, absolute constants set to 1.
    """

    # pylint: disable=too-many-arguments
    if t < 1 or lam <= 0 or not 0 < delta < 1:
        raise ContractViolation(f"regret_bound: need T >= 1, lambda > 0 and 0 < delta < 1, got {t}, {lam}, {delta}")

    factor = c_bar * n_bandits + 1
    width = sqrt(max(p_tilde * log(1.0 + t / lam) + 1.0 / lam + 1.0, 0.0))
    radicand = (p_tilde - 2.0) * log((lam + t) * (1 + n_bandits) / (lam * delta)) + 1.0 / lam
    confidence = sqrt(max(radicand, 0.0)) + sqrt(lam) * norm_bound + 2.0
    return factor * sqrt(t) * 2.0 * width * confidence + 2.0 * factor


def regret_series(log_: RunLog) -> tuple[Vector, Vector]:
    """per-round and cumulative regret from the clean rewards of a log"""

    per_round = np.empty(len(log_.records))
    for i, record in enumerate(log_.records):
        if record.h_star is None or record.h_clean is None:
            raise ContractViolation(f"round {record.t} of {log_.stem()} has no oracle value")
        per_round[i] = record.h_star - record.h_clean
    return per_round, np.cumsum(per_round)


def ucb_coverage(log_: RunLog) -> float:
    """
    Fraction of rounds whose prediction error |𝓕 − ℋ| is within the logged
    confidence width. Rounds without a clean reward are skipped.
    """

    covered = 0
    total = 0
    for record in log_.records:
        if record.h_clean is None:
            continue
        total += 1
        if abs(record.predicted - record.h_clean) <= record.ucb_width:
            covered += 1
    return covered / total if total else 0.0
