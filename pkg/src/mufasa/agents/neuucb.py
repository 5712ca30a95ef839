from dataclasses import replace

import numpy as np

from ..assembly import AssembledSpec
from ..confidence import UcbConfig, ucb_total
from ..mlp import NetSpec, TrainConfig
from .base import ArmSetRound, Decision, Policy, RoundOutcome, best_separable, require_full_feedback
from .mufasa import MufasaPolicy


def single_network_spec(sub_spec: NetSpec, shared_width: int = 2) -> AssembledSpec:
    """A one-bandit assembly around `sub_spec`; the shared network is never evaluated."""

    return AssembledSpec.build(
        [sub_spec.in_dim],
        sub_depth=sub_spec.depth,
        sub_width=sub_spec.width,
        shared_depth=1,
        shared_width=shared_width,
        c_bar=1.0,
    )


class NeuUcbPolicy(Policy):
    """
    K independent single-network UCB learners. Learner k is a one-bandit
    `MufasaPolicy` without shared network, seeded with `seed + k`, scoring
    f_k(x) + B^k(x) on bandit k alone.
    """

    name = "neuucb"

    def __init__(
        self,
        sub_specs: list[NetSpec],
        ucb: UcbConfig,
        train: TrainConfig,
        seed: int,
        *,
        train_every: int = 50,
        max_history: int | None = None,
    ):
        # pylint: disable=too-many-arguments
        super().__init__()
        ucb = replace(ucb, c_bar=1.0)
        self.learners = [
            MufasaPolicy(
                single_network_spec(sub_spec),
                ucb,
                train,
                seed + k,
                train_every=train_every,
                max_history=max_history,
                shared_net=False,
            )
            for k, sub_spec in enumerate(sub_specs)
        ]

    def _select(self, arms: ArmSetRound) -> Decision:
        rounds = [
            ArmSetRound(arms.t, (arms.arms[k],), (arms.arm_ids[k],) if arms.arm_ids is not None else None)
            for k in range(len(self.learners))
        ]
        if arms.allowed is not None:
            # commit every learner to its part of the best admissible combination
            scores = [learner.score_all(sub_round).total for learner, sub_round in zip(self.learners, rounds)]
            indices = best_separable(arms, scores)
            rounds = [replace(sub_round, allowed=np.array([[i]])) for sub_round, i in zip(rounds, indices)]

        chosen: list[int] = []
        predicted = 0.0
        widths: list[float] = []
        for learner, sub_round in zip(self.learners, rounds):
            decision = learner.select(sub_round)
            chosen.append(decision.combination.indices[0])
            predicted += decision.predicted
            widths.append(decision.ucb.total if decision.ucb is not None else 0.0)

        return Decision(arms.combination(chosen), predicted, ucb_total(widths, 0.0, 1.0))

    def _observe(self, outcome: RoundOutcome):
        require_full_feedback(self.name, outcome, len(self.learners))
        for k, learner in enumerate(self.learners):
            reward = outcome.sub_rewards[k]
            sub_combination = replace(
                outcome.combination,
                indices=(outcome.combination.indices[k],),
                features=(outcome.combination.features[k],),
            )
            learner.observe(RoundOutcome(outcome.t, sub_combination, reward, {0: reward}))
