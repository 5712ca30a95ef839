from dataclasses import dataclass

import numpy as np

from ..confidence import ucb_total
from ..errors import ConfigError
from ..tensor import Matrix, Vector, quad_norm_rows, sherman_morrison_update
from .base import ArmSetRound, Decision, Policy, RoundOutcome, best_separable, require_full_feedback


@dataclass
class RidgeState:
    a_inv: Matrix
    b: Vector

    @staticmethod
    def fresh(dim: int, lam: float) -> "RidgeState":
        return RidgeState(np.eye(dim) / lam, np.zeros(dim))

    @property
    def theta(self) -> Vector:
        return self.a_inv @ self.b


class LinUcbPolicy(Policy):
    """
    One ridge-regression UCB learner per bandit, each playing its own
    argmax of xᵀθ̂ + α‖x‖_{A⁻¹}.
    """

    name = "linucb"

    def __init__(self, dims: list[int], alpha: float = 1.0, lam: float = 1.0):
        super().__init__()
        if alpha < 0:
            raise ConfigError(f"alpha must be >= 0, got {alpha}")
        if lam <= 0:
            raise ConfigError(f"ridge λ must be > 0, got {lam}")
        self.alpha = alpha
        self.lam = lam
        self.states = [RidgeState.fresh(dim, lam) for dim in dims]

    def scores(self, k: int, arms: Matrix) -> tuple[Vector, Vector]:
        """(means, widths) of every arm of bandit k"""

        state = self.states[k]
        return arms @ state.theta, self.alpha * quad_norm_rows(state.a_inv, arms)

    def _select(self, arms: ArmSetRound) -> Decision:
        means: list[Vector] = []
        widths: list[Vector] = []
        for k, matrix in enumerate(arms.arms):
            mean, width = self.scores(k, matrix)
            means.append(mean)
            widths.append(width)

        indices = best_separable(arms, [mean + width for mean, width in zip(means, widths)])
        return Decision(
            arms.combination(indices),
            sum(float(mean[i]) for mean, i in zip(means, indices)),
            ucb_total([float(width[i]) for width, i in zip(widths, indices)], 0.0, 1.0),
        )

    def _observe(self, outcome: RoundOutcome):
        require_full_feedback(self.name, outcome, len(self.states))
        for k, state in enumerate(self.states):
            x = outcome.combination.features[k]
            state.a_inv = sherman_morrison_update(state.a_inv, x, 1.0)
            state.b = state.b + outcome.sub_rewards[k] * x
