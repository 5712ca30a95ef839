"""
Simulated multi-facet environments.

An environment owns K bandits. Every round it offers one arm matrix per
bandit; playing one arm per bandit yields the sub-rewards r^k = h_k(x^k) and
the final reward R = H(r) + ε. Bandits are indexed from 0.

Randomness is derived from (seed, purpose, t) so that every round can be
regenerated independently of the rounds before it.
"""

from dataclasses import dataclass
from typing import Literal, Sequence, TypeAlias

import numpy as np
import numpy.typing as npt

from .agents.base import COMBINATION_CAP, ArmSetRound
from .dataset import Dataset, block_arms
from .errors import ConfigError, ContractViolation
from .log import LOG
from .seeding import Purpose, derived_rng
from .tensor import Matrix, Vector

SubRewardKind: TypeAlias = Literal["linear", "square", "cosine", "indicator", "dataset"]
FinalRewardKind: TypeAlias = Literal["h1_sum", "h2_weighted", "weighted", "nonlinear_sqrt"]
ArmGeneration: TypeAlias = Literal["unit_ball", "dataset", "tradeoff"]

SUB_REWARD_KINDS: tuple[SubRewardKind, ...] = ("linear", "square", "cosine", "indicator", "dataset")
FINAL_REWARD_KINDS: tuple[FinalRewardKind, ...] = ("h1_sum", "h2_weighted", "weighted", "nonlinear_sqrt")
ARM_GENERATIONS: tuple[ArmGeneration, ...] = ("unit_ball", "dataset", "tradeoff")


@dataclass(frozen=True)
class BanditSpec:
    dim: int
    n_arms: int
    kind: SubRewardKind = "linear"
    param: Vector | None = None
    """hidden unit vector a_k, drawn from the environment seed when unset"""
    dataset: Dataset | None = None


@dataclass(frozen=True)
class EnvSpec:
    # pylint: disable=too-many-instance-attributes

    bandits: tuple[BanditSpec, ...]
    final: FinalRewardKind = "h1_sum"
    weights: tuple[float, ...] | None = None
    c_bar: float | None = None
    noise_sigma: float = 0.0
    sub_noise_sigma: float = 0.0
    mask: Literal["all", "none"] | tuple[int, ...] = "all"
    arms: ArmGeneration = "unit_ball"

    def __post_init__(self):
        if not self.bandits:
            raise ConfigError("an environment needs at least one bandit")
        if self.final not in FINAL_REWARD_KINDS:
            raise ConfigError(f"unknown final reward {self.final!r}")
        if self.arms not in ARM_GENERATIONS:
            raise ConfigError(f"unknown arm generation {self.arms!r}")
        if self.noise_sigma < 0 or self.sub_noise_sigma < 0:
            raise ConfigError("noise levels must be >= 0")
        for k, bandit in enumerate(self.bandits):
            self._check_bandit(k, bandit)
        if isinstance(self.mask, tuple):
            for k in self.mask:
                if not 0 <= k < self.n_bandits:
                    raise ConfigError(f"mask names unknown bandit {k}")
        elif self.mask not in ("all", "none"):
            raise ConfigError(f"mask must be 'all', 'none' or a list of bandits, got {self.mask!r}")
        if self.final == "weighted" and (self.weights is None or len(self.weights) != self.n_bandits):
            raise ConfigError(f"weighted final reward needs {self.n_bandits} weights")
        if self.final == "nonlinear_sqrt" and self.c_bar is None:
            raise ConfigError("nonlinear_sqrt final reward needs an explicit c_bar")
        if self.c_bar is not None and self.c_bar <= 0:
            raise ConfigError(f"c_bar must be > 0, got {self.c_bar}")
        if self.arms == "tradeoff" and self.n_bandits != 2:
            raise ConfigError("the tradeoff arm generator needs exactly 2 bandits")

    def _check_bandit(self, k: int, bandit: BanditSpec):
        if bandit.kind not in SUB_REWARD_KINDS:
            raise ConfigError(f"bandit {k}: unknown sub-reward kind {bandit.kind!r}")
        if bandit.dim < 1 or bandit.n_arms < 1:
            raise ConfigError(f"bandit {k}: dimension and arm count must be >= 1")
        if self.arms == "dataset":
            if bandit.dataset is None or bandit.kind != "dataset":
                raise ConfigError(f"bandit {k}: dataset arms need a dataset and the 'dataset' sub-reward")
            if bandit.dim != bandit.dataset.dim * bandit.dataset.n_classes:
                raise ConfigError(f"bandit {k}: dimension must be classes x features")
            if not 1 <= bandit.n_arms <= bandit.dataset.n_classes:
                raise ConfigError(f"bandit {k}: arm pool must hold between 1 and {bandit.dataset.n_classes} arms")
        elif bandit.kind == "dataset":
            raise ConfigError(f"bandit {k}: the 'dataset' sub-reward needs dataset arms")
        if self.arms == "tradeoff" and (bandit.kind != "indicator" or bandit.n_arms != 2):
            raise ConfigError(f"bandit {k}: tradeoff arms need the 'indicator' sub-reward and 2 arms")
        if bandit.param is not None and bandit.param.shape != (bandit.dim,):
            raise ConfigError(f"bandit {k}: hidden parameter must have dimension {bandit.dim}")

    @property
    def n_bandits(self) -> int:
        return len(self.bandits)

    @property
    def final_weights(self) -> tuple[float, ...] | None:
        if self.final == "h1_sum":
            return (1.0,) * self.n_bandits
        if self.final == "h2_weighted":
            return (2.0,) + (1.0,) * (self.n_bandits - 1)
        if self.final == "weighted":
            return self.weights
        return None

    @property
    def effective_c_bar(self) -> float:
        """The configured C̄, else the convention for the final reward (1 for sums, the largest weight otherwise)."""

        if self.c_bar is not None:
            return self.c_bar
        weights = self.final_weights
        assert weights is not None
        return max(abs(w) for w in weights)

    def observed_bandits(self) -> tuple[int, ...]:
        if self.mask == "all":
            return tuple(range(self.n_bandits))
        if self.mask == "none":
            return ()
        return tuple(sorted(set(self.mask)))


@dataclass(frozen=True)
class Observation:
    final_reward: float
    sub_rewards: dict[int, float]
    h_clean: float
    clean_sub_rewards: tuple[float, ...]


def final_reward_rows(spec: EnvSpec, rewards: npt.ArrayLike) -> Vector:
    """H applied to every row of a (n × K) sub-reward matrix."""

    rows = np.asarray(rewards, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != spec.n_bandits:
        raise ContractViolation(f"final reward needs {spec.n_bandits} sub-rewards per row, got shape {rows.shape}")
    weights = spec.final_weights
    if weights is not None:
        return rows @ np.asarray(weights)
    return np.sqrt(np.sum(np.maximum(rows, 0.0), axis=1))


def final_reward(spec: EnvSpec, rewards: Sequence[float]) -> float:
    if len(rewards) != spec.n_bandits:
        raise ContractViolation(f"final reward needs {spec.n_bandits} sub-rewards, got {len(rewards)}")
    return float(final_reward_rows(spec, [list(rewards)])[0])


def _unit_ball(rng: np.random.Generator, n: int, dim: int) -> Matrix:
    directions = rng.normal(size=(n, dim))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    radii = rng.uniform(size=(n, 1)) ** (1.0 / dim)
    return directions / norms * radii


def lipschitz_audit(spec: EnvSpec, seed: int, n_pairs: int = 10_000) -> int:
    """Number of random sub-reward pairs in [0, 1]^K violating |H(r) − H(r′)| ≤ C̄‖r − r′‖₂."""

    rng = derived_rng(seed, Purpose.AUDIT)
    first = rng.uniform(size=(n_pairs, spec.n_bandits))
    second = rng.uniform(size=(n_pairs, spec.n_bandits))
    gaps = np.abs(final_reward_rows(spec, first) - final_reward_rows(spec, second))
    bounds = spec.effective_c_bar * np.linalg.norm(first - second, axis=1) + 1e-12
    return int(np.sum(gaps > bounds))


class Environment:
    spec: EnvSpec
    seed: int
    params: tuple[Vector, ...]

    def __init__(self, spec: EnvSpec, seed: int):
        self.spec = spec
        self.seed = seed

        params: list[Vector] = []
        for k, bandit in enumerate(spec.bandits):
            if bandit.param is not None:
                param = np.asarray(bandit.param, dtype=np.float64)
            else:
                param = derived_rng(seed, Purpose.PARAMS, k).normal(size=bandit.dim)
            norm = float(np.linalg.norm(param))
            if norm == 0.0:
                raise ConfigError(f"bandit {k}: hidden parameter must be nonzero")
            params.append(param / norm)
        self.params = tuple(params)

        if spec.final_weights is not None or spec.c_bar is not None:
            violations = lipschitz_audit(spec, seed)
            if violations:
                LOG.warn(
                    "lipschitz_audit",
                    f"c_bar = {spec.effective_c_bar} is violated by {violations} of 10000 random sub-reward pairs",
                )

    @property
    def n_bandits(self) -> int:
        return self.spec.n_bandits

    @property
    def c_bar(self) -> float:
        return self.spec.effective_c_bar

    def _dataset_position(self, k: int, t: int) -> int:
        dataset = self.spec.bandits[k].dataset
        assert dataset is not None
        n = len(dataset.rounds)
        epoch, pos = divmod(t, n)
        return int(derived_rng(self.seed, Purpose.SHUFFLE, k, epoch).permutation(n)[pos])

    def label(self, k: int, t: int) -> int:
        """true class of bandit k's sample in round t (dataset arms only)"""

        dataset = self.spec.bandits[k].dataset
        if dataset is None:
            raise ContractViolation(f"bandit {k} has no dataset")
        return dataset.rounds[self._dataset_position(k, t)].label

    def _dataset_arms(self, k: int, t: int, rng: np.random.Generator) -> tuple[Matrix, tuple[int, ...]]:
        bandit = self.spec.bandits[k]
        dataset = bandit.dataset
        assert dataset is not None
        sample = dataset.rounds[self._dataset_position(k, t)]
        arms = block_arms(sample.features, dataset.n_classes)

        if bandit.n_arms == dataset.n_classes:
            return arms, tuple(range(dataset.n_classes))

        # the true class is always offered, the rest of the pool is drawn at random
        others = [c for c in range(dataset.n_classes) if c != sample.label]
        pool = [sample.label, *rng.choice(others, size=bandit.n_arms - 1, replace=False).tolist()]
        pool = [int(c) for c in rng.permutation(pool)]
        return arms[pool], tuple(pool)

    def _tradeoff_arms(self, k: int, rng: np.random.Generator) -> tuple[Matrix, int]:
        """a random arm with sub-reward 1 and its negation, shuffled; returns the position of the first"""

        x = _unit_ball(rng, 1, self.spec.bandits[k].dim)[0]
        positive = x if float(self.params[k] @ x) > 0.0 else -x
        order = rng.permutation(2)
        arms = np.stack([positive, -positive])[order]
        return arms, int(np.flatnonzero(order == 0)[0])

    def gen_round(self, t: int) -> ArmSetRound:
        rng = derived_rng(self.seed, Purpose.ARMS, t)

        arms: list[Matrix] = []
        ids: list[tuple[int, ...]] = []
        positives: list[int] = []
        for k, bandit in enumerate(self.spec.bandits):
            if self.spec.arms == "dataset":
                assert bandit.dataset is not None
                if t > 0 and t % len(bandit.dataset.rounds) == 0:
                    LOG.warn("dataset_reshuffle", f"bandit {k}: dataset exhausted after {t} rounds, reshuffling")
                matrix, arm_ids = self._dataset_arms(k, t, rng)
                arms.append(matrix)
                ids.append(arm_ids)
            elif self.spec.arms == "tradeoff":
                matrix, positive = self._tradeoff_arms(k, rng)
                arms.append(matrix)
                positives.append(positive)
            else:
                arms.append(_unit_ball(rng, bandit.n_arms, bandit.dim))

        if self.spec.arms == "tradeoff":
            # only the two combinations where exactly one bandit plays its rewarding arm
            first, second = positives
            allowed = np.array(sorted([(first, 1 - second), (1 - first, second)]), dtype=np.int64)
            return ArmSetRound(t, tuple(arms), None, allowed)
        return ArmSetRound(t, tuple(arms), tuple(ids) if self.spec.arms == "dataset" else None)

    def sub_reward_rows(self, k: int, arms: Matrix, t: int | None = None) -> Vector:
        bandit = self.spec.bandits[k]
        arms = np.asarray(arms, dtype=np.float64).reshape(-1, bandit.dim)

        if bandit.kind == "dataset":
            if t is None:
                raise ContractViolation("dataset sub-rewards need the round index")
            dataset = bandit.dataset
            assert dataset is not None
            blocks = arms.reshape(arms.shape[0], dataset.n_classes, dataset.dim)
            norms = np.linalg.norm(blocks, axis=2)
            hit = (np.argmax(norms, axis=1) == self.label(k, t)) & (np.max(norms, axis=1) > 0.0)
            return hit.astype(np.float64)

        inner = arms @ self.params[k]
        if bandit.kind == "linear":
            return inner
        if bandit.kind == "square":
            return inner**2
        if bandit.kind == "cosine":
            return (np.cos(3.0 * inner) + 1.0) / 2.0
        return (inner > 0.0).astype(np.float64)

    def sub_reward(self, k: int, x: npt.ArrayLike, t: int | None = None) -> float:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.spec.bandits[k].dim,):
            raise ContractViolation(f"bandit {k} expects arms of dimension {self.spec.bandits[k].dim}, got {x.shape}")
        return float(self.sub_reward_rows(k, x[None, :], t)[0])

    def final_reward(self, rewards: Sequence[float]) -> float:
        return final_reward(self.spec, rewards)

    def observe(self, arms: ArmSetRound, indices: Sequence[int]) -> Observation:
        combination = arms.combination(indices)
        clean = tuple(self.sub_reward(k, x, arms.t) for k, x in enumerate(combination.features))
        h_clean = self.final_reward(clean)

        rng = derived_rng(self.seed, Purpose.NOISE, arms.t)
        noise = rng.normal(0.0, self.spec.noise_sigma) if self.spec.noise_sigma > 0 else 0.0
        sub_noise = (
            rng.normal(0.0, self.spec.sub_noise_sigma, size=self.n_bandits)
            if self.spec.sub_noise_sigma > 0
            else np.zeros(self.n_bandits)
        )

        observed = {k: clean[k] + float(sub_noise[k]) for k in self.spec.observed_bandits()}
        return Observation(h_clean + float(noise), observed, h_clean, clean)

    def _all_sub_rewards(self, arms: ArmSetRound) -> list[Vector]:
        return [self.sub_reward_rows(k, matrix, arms.t) for k, matrix in enumerate(arms.arms)]

    def oracle_best(self, arms: ArmSetRound, cap: int = COMBINATION_CAP) -> tuple[tuple[int, ...], float]:
        """exhaustive search of the best combination under the clean final reward"""

        grid = arms.candidates(cap)
        per_arm = self._all_sub_rewards(arms)
        rewards = np.stack([per_arm[k][grid[:, k]] for k in range(self.n_bandits)], axis=1)
        values = final_reward_rows(self.spec, rewards)
        best = int(np.argmax(values))
        return tuple(int(i) for i in grid[best]), float(values[best])

    def per_bandit_regret(self, arms: ArmSetRound, indices: Sequence[int]) -> tuple[float, ...]:
        """max_i h_k(x_i^k) − h_k(x^k) for every bandit"""

        per_arm = self._all_sub_rewards(arms)
        return tuple(float(np.max(values) - values[i]) for values, i in zip(per_arm, indices))
