from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from math import prod
from typing import ClassVar, Mapping, Sequence

import numpy as np
import numpy.typing as npt

from ..assembly import Combination
from ..confidence import UcbBreakdown
from ..errors import CombinationCapExceeded, ContractViolation, UnsupportedConfiguration
from ..tensor import Matrix

COMBINATION_CAP = 10**6


@dataclass(frozen=True)
class ArmSetRound:
    """The K candidate arm matrices of one round (arm i of bandit k is `arms[k][i]`)."""

    t: int
    arms: tuple[Matrix, ...]
    arm_ids: tuple[tuple[int, ...], ...] | None = None
    """persistent arm identities, when the environment has them"""
    allowed: npt.NDArray[np.int64] | None = None
    """the admissible index tuples, one per row, when the round offers only part of the product space"""

    @property
    def n_bandits(self) -> int:
        return len(self.arms)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(arms.shape[0] for arms in self.arms)

    def candidates(self, cap: int = COMBINATION_CAP) -> npt.NDArray[np.int64]:
        """The index tuples a policy may play this round, in lexicographic order."""

        if self.allowed is None:
            return combination_grid(self.sizes, cap)
        if self.allowed.shape[0] > cap:
            raise CombinationCapExceeded(self.sizes, cap)
        return self.allowed

    def combination(self, indices: Sequence[int]) -> Combination:
        if len(indices) != self.n_bandits:
            raise ContractViolation(f"combination needs {self.n_bandits} indices, got {len(indices)}")
        for k, (i, n) in enumerate(zip(indices, self.sizes)):
            if not 0 <= i < n:
                raise ContractViolation(f"arm {i} out of range for bandit {k} with {n} arms")
        if self.allowed is not None and not np.any(np.all(self.allowed == np.asarray(indices), axis=1)):
            raise ContractViolation(f"combination {tuple(indices)} is not offered in round {self.t}")
        return Combination(tuple(int(i) for i in indices), tuple(arms[i] for arms, i in zip(self.arms, indices)))


@dataclass(frozen=True)
class Decision:
    combination: Combination
    predicted: float = 0.0
    ucb: UcbBreakdown | None = None

    @property
    def score(self) -> float:
        return self.predicted + (self.ucb.total if self.ucb is not None else 0.0)


@dataclass(frozen=True)
class RoundOutcome:
    t: int
    combination: Combination
    final_reward: float
    sub_rewards: Mapping[int, float] = field(default_factory=dict)
    ucb: UcbBreakdown | None = None
    predicted: float = 0.0
    h_clean: float | None = None
    h_star: float | None = None

    @property
    def regret(self) -> float | None:
        if self.h_clean is None or self.h_star is None:
            return None
        return self.h_star - self.h_clean


def combination_grid(sizes: Sequence[int], cap: int = COMBINATION_CAP) -> npt.NDArray[np.int64]:
    """All index tuples of the product space, one per row, in lexicographic order."""

    sizes = tuple(int(n) for n in sizes)
    if any(n < 1 for n in sizes):
        raise ContractViolation(f"every bandit needs at least one arm, got sizes {sizes}")
    if prod(sizes) > cap:
        raise CombinationCapExceeded(sizes, cap)
    return np.indices(sizes).reshape(len(sizes), -1).T


def enumerate_combinations(arms: ArmSetRound, cap: int = COMBINATION_CAP) -> list[Combination]:
    return [arms.combination(row) for row in arms.candidates(cap)]


def best_separable(arms: ArmSetRound, scores: Sequence[npt.ArrayLike]) -> tuple[int, ...]:
    """
    The combination maximizing Σ_k scores[k][i_k]: every bandit's own argmax,
    or the best admissible row when the round restricts the combinations.
    """

    rows = [np.asarray(s, dtype=np.float64) for s in scores]
    if arms.allowed is None:
        return tuple(int(np.argmax(s)) for s in rows)
    totals = sum(s[arms.allowed[:, k]] for k, s in enumerate(rows))
    return tuple(int(i) for i in arms.allowed[int(np.argmax(totals))])


def require_full_feedback(policy: str, outcome: RoundOutcome, n_bandits: int):
    if len(outcome.sub_rewards) != n_bandits:
        raise UnsupportedConfiguration(
            f"{policy} needs every sub-reward each round, round {outcome.t} "
            f"reported {sorted(outcome.sub_rewards)} of {n_bandits} bandits"
        )


class Policy(ABC):
    name: ClassVar[str]

    _pending: int | None

    def __init__(self):
        self._pending = None

    @abstractmethod
    def _select(self, arms: ArmSetRound) -> Decision: ...

    @abstractmethod
    def _observe(self, outcome: RoundOutcome): ...

    def select(self, arms: ArmSetRound) -> Decision:
        if self._pending is not None:
            raise ContractViolation(f"{self.name}: round {self._pending} was selected but never observed")
        decision = self._select(arms)
        self._pending = arms.t
        return decision

    def observe(self, outcome: RoundOutcome):
        if self._pending is None:
            raise ContractViolation(f"{self.name}: observe without a preceding select (round {outcome.t})")
        if outcome.t != self._pending:
            raise ContractViolation(f"{self.name}: observed round {outcome.t} but selected round {self._pending}")
        self._observe(outcome)
        self._pending = None

    def branch(self) -> str:
        """training path label of the last observed round, for run logs"""

        return "none"
