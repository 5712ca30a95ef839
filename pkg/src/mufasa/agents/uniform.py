from ..seeding import Purpose, derived_rng
from .base import ArmSetRound, Decision, Policy, RoundOutcome


class RandomPolicy(Policy):
    """
    Uniform choice in every bandit, or among the offered combinations when the
    round restricts them. The draw of round t depends only on (seed, t).
    """

    name = "random"

    def __init__(self, seed: int):
        super().__init__()
        self.seed = seed

    def _select(self, arms: ArmSetRound) -> Decision:
        rng = derived_rng(self.seed, Purpose.POLICY, arms.t)
        if arms.allowed is not None:
            return Decision(arms.combination(arms.allowed[int(rng.integers(arms.allowed.shape[0]))]))
        return Decision(arms.combination([int(rng.integers(n)) for n in arms.sizes]))

    def _observe(self, outcome: RoundOutcome):
        pass
