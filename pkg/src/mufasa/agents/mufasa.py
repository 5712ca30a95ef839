"""
The assembled-network UCB policy.

Each round every offered combination of one arm per bandit is scored as

    𝓕(X) + C̄·Σ_k B^k(x^k) + B^F(X)

where B^k only depends on bandit k's arm, so it is evaluated once per arm
instead of once per combination. The chosen combination's gradients feed the
K + 1 design streams, and every `train_every` rounds the networks are
retrained: per network when every past round reported all sub-rewards, end
to end on the Ω samples otherwise.
"""

from collections import Counter
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from .. import assembly
from ..assembly import AssembledParams, AssembledSpec, HistoryEntry, TrainingSample
from ..confidence import DesignState, UcbConfig, bonus_rows, rebuild_current, ucb_total, update_design
from ..errors import ConfigError
from ..log import LOG
from ..mlp import TrainConfig, forward_batch, grad_params_batch
from ..tensor import Matrix, Vector
from .base import COMBINATION_CAP, ArmSetRound, Decision, Policy, RoundOutcome


@dataclass(frozen=True)
class Scores:
    """Scores of every candidate combination of a round, rows in lexicographic order."""

    grid: npt.NDArray[np.int64]
    predicted: Vector
    per_bandit: Matrix
    """B^k of the arm each combination plays in bandit k (N × K)"""
    shared: Vector
    total: Vector


@dataclass
class _Chosen:
    sub_grads: list[tuple[Vector, Vector]]
    shared_grads: tuple[Vector, Vector] | None
    arm_ids: tuple[int, ...] | None


@dataclass
class _ArmEval:
    outputs: Matrix
    init_outputs: Matrix
    grads: Matrix
    init_grads: Matrix
    bonus: Vector


class MufasaPolicy(Policy):
    # pylint: disable=too-many-instance-attributes

    name = "mufasa"

    spec: AssembledSpec
    params: AssembledParams
    init: AssembledParams
    designs: list[DesignState]
    shared_design: DesignState | None
    history: list[HistoryEntry]
    branch_counts: Counter[str]
    omega_sizes: list[int]
    rounds_observed: int

    def __init__(
        self,
        spec: AssembledSpec,
        ucb: UcbConfig,
        train: TrainConfig,
        seed: int,
        *,
        train_every: int = 50,
        max_history: int | None = None,
        recompute_design: bool = False,
        shared_net: bool = True,
        combination_cap: int = COMBINATION_CAP,
    ):
        # pylint: disable=too-many-arguments
        super().__init__()
        if train_every < 1:
            raise ConfigError(f"train_every must be >= 1, got {train_every}")
        if max_history is not None and max_history < 1:
            raise ConfigError(f"max_history must be >= 1, got {max_history}")
        if any(sub.out_dim != 1 for sub in spec.sub_specs):
            raise ConfigError("per-bandit confidence bounds need sub-networks with a scalar output")

        self.spec = spec
        self.ucb = ucb
        self.train_cfg = train
        self.seed = seed
        self.train_every = train_every
        self.max_history = max_history
        self.recompute_design = recompute_design
        self.shared_net = shared_net
        self.combination_cap = combination_cap

        self.params = assembly.init_assembled(spec, seed)
        self.init = self.params
        self.designs = [DesignState.fresh(sub.n_params, train.lambda_reg, sub.width) for sub in spec.sub_specs]
        self.shared_design = (
            DesignState.fresh(spec.shared_spec.n_params, train.lambda_reg, spec.shared_spec.width)
            if shared_net
            else None
        )

        self.history = []
        self.branch_counts = Counter()
        self.omega_sizes = []
        self.rounds_observed = 0
        self._sub_pulls = [Counter[int]() for _ in spec.sub_specs]
        self._combo_pulls = Counter[tuple[int, ...]]()
        self._last_branch = "none"
        self._chosen: _Chosen | None = None

    @property
    def delta_per_stream(self) -> float:
        return self.ucb.delta / (self.spec.n_bandits + 1)

    def _eval_arms(self, k: int, arms: Matrix, counts: list[int] | None) -> _ArmEval:
        sub_spec = self.spec.sub_specs[k]
        grads = grad_params_batch(sub_spec, self.params.subs[k], arms)
        init_grads = grad_params_batch(sub_spec, self.init.subs[k], arms)
        bonus = bonus_rows(
            self.ucb,
            self.designs[k],
            grads,
            init_grads,
            t=self.rounds_observed,
            depth=sub_spec.depth,
            width=sub_spec.width,
            delta=self.delta_per_stream,
            counts=counts,
        )
        return _ArmEval(
            forward_batch(sub_spec, self.params.subs[k], arms),
            forward_batch(sub_spec, self.init.subs[k], arms),
            grads,
            init_grads,
            bonus,
        )

    def _score(self, arms: ArmSetRound) -> tuple[Scores, list[_ArmEval], Matrix | None, Matrix | None]:
        if arms.n_bandits != self.spec.n_bandits:
            raise ConfigError(f"policy was built for {self.spec.n_bandits} bandits, round has {arms.n_bandits}")
        grid = arms.candidates(self.combination_cap)

        evals: list[_ArmEval] = []
        for k, matrix in enumerate(arms.arms):
            counts = None
            if self.ucb.uses_pulls and arms.arm_ids is not None:
                counts = [self._sub_pulls[k][arm_id] for arm_id in arms.arm_ids[k]]
            evals.append(self._eval_arms(k, matrix, counts))

        per_bandit = np.stack([evals[k].bonus[grid[:, k]] for k in range(self.spec.n_bandits)], axis=1)
        bonus_sum = np.zeros(grid.shape[0])
        for k in range(self.spec.n_bandits):
            bonus_sum = bonus_sum + per_bandit[:, k]

        f_rows = np.concatenate([evals[k].outputs[grid[:, k]] for k in range(self.spec.n_bandits)], axis=1)
        if not self.shared_net:
            predicted = np.zeros(grid.shape[0])
            for k in range(self.spec.n_bandits):
                predicted = predicted + f_rows[:, k]
            shared = np.zeros(grid.shape[0])
            total = predicted + (self.spec.c_bar * bonus_sum + shared)
            return Scores(grid, predicted, per_bandit, shared, total), evals, None, None

        assert self.shared_design is not None
        f0_rows = np.concatenate([evals[k].init_outputs[grid[:, k]] for k in range(self.spec.n_bandits)], axis=1)
        shared_spec = self.spec.shared_spec
        predicted = forward_batch(shared_spec, self.params.shared, assembly.shared_inputs(self.spec, f_rows))
        predicted = predicted[:, 0]
        shared_grads = assembly.grad_shared_batch(self.spec, self.params, f_rows)
        shared_init_grads = assembly.grad_shared_batch(self.spec, self.init, f0_rows)

        counts = None
        if self.ucb.uses_pulls and arms.arm_ids is not None:
            ids = arms.arm_ids
            counts = [self._combo_pulls[tuple(ids[k][i] for k, i in enumerate(row))] for row in grid]
        shared = bonus_rows(
            self.ucb,
            self.shared_design,
            shared_grads,
            shared_init_grads,
            t=self.rounds_observed,
            depth=shared_spec.depth,
            width=shared_spec.width,
            delta=self.delta_per_stream,
            counts=counts,
        )

        total = predicted + (self.spec.c_bar * bonus_sum + shared)
        return Scores(grid, predicted, per_bandit, shared, total), evals, shared_grads, shared_init_grads

    def score_all(self, arms: ArmSetRound) -> Scores:
        """Scores of every offered combination, without committing to a choice."""

        scores, _, _, _ = self._score(arms)
        return scores

    def _select(self, arms: ArmSetRound) -> Decision:
        scores, evals, shared_grads, shared_init_grads = self._score(arms)
        best = int(np.argmax(scores.total))
        row = scores.grid[best]

        self._chosen = _Chosen(
            [(evals[k].grads[i], evals[k].init_grads[i]) for k, i in enumerate(row)],
            (
                (shared_grads[best], shared_init_grads[best])
                if shared_grads is not None and shared_init_grads is not None
                else None
            ),
            tuple(arms.arm_ids[k][i] for k, i in enumerate(row)) if arms.arm_ids is not None else None,
        )

        ucb = ucb_total(
            [float(b) for b in scores.per_bandit[best]],
            float(scores.shared[best]),
            self.spec.c_bar,
        )
        return Decision(arms.combination(row), float(scores.predicted[best]), ucb)

    def _window(self) -> list[HistoryEntry]:
        if self.max_history is None:
            return self.history
        return self.history[-self.max_history :]

    def _observe(self, outcome: RoundOutcome):
        chosen = self._chosen
        assert chosen is not None
        self._chosen = None

        entry = HistoryEntry(outcome.combination, outcome.final_reward, dict(outcome.sub_rewards))
        self.history.append(entry)
        if self.max_history is not None and len(self.history) > self.max_history:
            del self.history[0]
        self.omega_sizes.append(len(outcome.sub_rewards) + 1)

        for k, (g_current, g_init) in enumerate(chosen.sub_grads):
            self.designs[k] = update_design(self.designs[k], g_current, g_init)
        if self.shared_design is not None and chosen.shared_grads is not None:
            self.shared_design = update_design(self.shared_design, *chosen.shared_grads)
        if chosen.arm_ids is not None:
            for k, arm_id in enumerate(chosen.arm_ids):
                self._sub_pulls[k][arm_id] += 1
            self._combo_pulls[chosen.arm_ids] += 1

        self.rounds_observed += 1
        self._last_branch = "none"
        if self.rounds_observed % self.train_every == 0:
            self._train()

    def _train(self):
        window = self._window()
        complete = all(entry.is_complete(self.spec.n_bandits) for entry in window)

        if not self.shared_net:
            self.params = assembly.train_subs(self.spec, self.params, window, self.train_cfg)
            branch = "all"
        elif complete:
            self.params = assembly.train_all(self.spec, self.params, window, self.train_cfg)
            branch = "all"
        else:
            samples: list[TrainingSample] = []
            for entry in window:
                samples.extend(
                    assembly.build_partial_samples(
                        entry.combination, entry.final_reward, entry.sub_rewards, self.spec.c_bar
                    )
                )
            self.params = assembly.train_partial(self.spec, self.params, samples, self.train_cfg)
            branch = "partial"

        self.branch_counts[branch] += 1
        self._last_branch = branch
        LOG.debug(f"{self.name}: round {self.rounds_observed} trained on {len(window)} rounds ({branch})")

        if self.recompute_design:
            self._recompute_designs(window)

    def _recompute_designs(self, window: list[HistoryEntry]):
        for k, sub_spec in enumerate(self.spec.sub_specs):
            contexts = np.stack([entry.combination.features[k] for entry in window])
            self.designs[k] = rebuild_current(self.designs[k], grad_params_batch(sub_spec, self.params.subs[k], contexts))

        if self.shared_design is not None:
            inputs = [np.stack([entry.combination.features[k] for entry in window]) for k in range(self.spec.n_bandits)]
            f_rows = assembly.sub_outputs_batch(self.spec, self.params, inputs)
            self.shared_design = rebuild_current(
                self.shared_design, assembly.grad_shared_batch(self.spec, self.params, f_rows)
            )

    def branch(self) -> str:
        return self._last_branch
