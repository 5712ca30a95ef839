from dataclasses import dataclass, field

import numpy as np

from ..confidence import ucb_total
from ..errors import ConfigError, NotSpdError
from ..log import LOG
from ..tensor import Matrix, Vector
from .base import ArmSetRound, Decision, Policy, RoundOutcome, best_separable, require_full_feedback

KERNEL_JITTER = 1e-8
SCHUR_MIN = 1e-12


def rbf_kernel(a: Matrix, b: Matrix, bandwidth: float) -> Matrix:
    """exp(−‖a_i − b_j‖² / 2h²) for all row pairs"""

    sq_dists = np.sum(a**2, axis=1)[:, None] + np.sum(b**2, axis=1)[None, :] - 2.0 * a @ b.T
    return np.exp(-np.maximum(sq_dists, 0.0) / (2.0 * bandwidth**2))


@dataclass
class KernelState:
    """Stored contexts, their rewards and (𝐊 + λI)⁻¹, grown one context at a time."""

    contexts: list[Vector] = field(default_factory=list)
    rewards: list[float] = field(default_factory=list)
    k_inv: Matrix = field(default_factory=lambda: np.zeros((0, 0)))

    def add(self, x: Vector, reward: float, bandwidth: float, lam: float):
        x = np.asarray(x, dtype=np.float64)
        diag = 1.0 + lam + KERNEL_JITTER
        if not self.contexts:
            self.contexts.append(x)
            self.rewards.append(reward)
            self.k_inv = np.array([[1.0 / diag]])
            return

        cross = rbf_kernel(np.stack(self.contexts), x[None, :], bandwidth)[:, 0]
        k_inv_cross = self.k_inv @ cross
        schur = diag - float(cross @ k_inv_cross)
        if schur <= SCHUR_MIN:
            raise NotSpdError(f"kernel matrix lost positive definiteness (Schur complement {schur:.3g})")

        n = len(self.contexts)
        grown = np.empty((n + 1, n + 1))
        grown[:n, :n] = self.k_inv + np.outer(k_inv_cross, k_inv_cross) / schur
        grown[:n, n] = -k_inv_cross / schur
        grown[n, :n] = -k_inv_cross / schur
        grown[n, n] = 1.0 / schur

        self.contexts.append(x)
        self.rewards.append(reward)
        self.k_inv = grown

    def posterior(self, arms: Matrix, bandwidth: float) -> tuple[Vector, Vector]:
        """(μ, σ) of every arm; an empty state gives μ = 0 and σ = 1"""

        if not self.contexts:
            return np.zeros(arms.shape[0]), np.ones(arms.shape[0])

        cross = rbf_kernel(arms, np.stack(self.contexts), bandwidth)
        mean = cross @ (self.k_inv @ np.asarray(self.rewards))
        variance = 1.0 - np.einsum("ij,jk,ik->i", cross, self.k_inv, cross)
        return mean, np.sqrt(np.maximum(variance, 0.0))


class KerUcbPolicy(Policy):
    """
    One RBF kernel-ridge UCB learner per bandit, scoring μ(x) + β·σ(x).
    Each learner stops storing contexts after `budget` rounds.
    """

    name = "kerucb"

    def __init__(self, n_bandits: int, bandwidth: float = 1.0, beta: float = 1.0, budget: int = 1000, lam: float = 1.0):
        # pylint: disable=too-many-arguments
        super().__init__()
        if bandwidth <= 0:
            raise ConfigError(f"RBF bandwidth must be > 0, got {bandwidth}")
        if budget < 0:
            raise ConfigError(f"context budget must be >= 0, got {budget}")
        if lam < 0:
            raise ConfigError(f"kernel ridge λ must be >= 0, got {lam}")
        self.bandwidth = bandwidth
        self.beta = beta
        self.budget = budget
        self.lam = lam
        self.states = [KernelState() for _ in range(n_bandits)]

    def _select(self, arms: ArmSetRound) -> Decision:
        means: list[Vector] = []
        widths: list[Vector] = []
        for state, matrix in zip(self.states, arms.arms):
            mean, sigma = state.posterior(matrix, self.bandwidth)
            means.append(mean)
            widths.append(self.beta * sigma)

        indices = best_separable(arms, [mean + width for mean, width in zip(means, widths)])
        return Decision(
            arms.combination(indices),
            sum(float(mean[i]) for mean, i in zip(means, indices)),
            ucb_total([float(width[i]) for width, i in zip(widths, indices)], 0.0, 1.0),
        )

    def _observe(self, outcome: RoundOutcome):
        require_full_feedback(self.name, outcome, len(self.states))
        for k, state in enumerate(self.states):
            if len(state.contexts) >= self.budget:
                continue
            state.add(outcome.combination.features[k], outcome.sub_rewards[k], self.bandwidth, self.lam)
            if len(state.contexts) == self.budget:
                LOG.debug(f"{self.name}: bandit {k} reached its budget of {self.budget} contexts")
