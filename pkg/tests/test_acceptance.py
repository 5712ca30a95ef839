"""
Long statistical runs on scaled-down synthetic environments. Deselected by
default, run with `pytest -m slow`.
"""

from pathlib import Path
from typing import Any

import numpy as np
import pytest

from mufasa import runner
from mufasa.agents import MufasaPolicy, RoundOutcome
from mufasa.config import Config, ValidatedConfig
from mufasa.envs import Environment
from mufasa.runlog import RunLog

pytestmark = pytest.mark.slow

SEEDS = [0, 1, 2, 3, 4]


def _config(outdir: Path, **settings: Any) -> ValidatedConfig:
    config = Config()
    config.set("run.outdir", str(outdir))
    config.set("run.seeds", SEEDS)
    for key, value in settings.items():
        config.set(key.replace("__", "."), value)
    return config.validate()


def _mean_final(logs: list[RunLog]) -> float:
    return float(np.mean([log.cum_regret or 0.0 for log in logs]))


def _mean_at(logs: list[RunLog], t: int) -> float:
    return float(np.mean([log.records[t - 1].cum_regret or 0.0 for log in logs]))


def _mufasa(cfg: ValidatedConfig, seed: int) -> tuple[Environment, MufasaPolicy]:
    env_spec = runner.build_env_spec(cfg)
    policy = runner.build_policy(cfg, "mufasa", env_spec, seed)
    assert isinstance(policy, MufasaPolicy)
    return Environment(env_spec, seed), policy


@pytest.mark.parametrize(
    ("mask", "branch", "omega"),
    [
        pytest.param("all", "all", 3, id="full-feedback"),
        pytest.param([1], "partial", 2, id="one-masked"),
        pytest.param("none", "partial", 1, id="none-observed"),
    ],
)
def test_training_branch(tmp_path: Path, mask: Any, branch: str, omega: int):
    cfg = _config(tmp_path, env__mask=mask, run__rounds=200)
    env, policy = _mufasa(cfg, 0)
    runner.play(env, policy, 200, RunLog("mufasa", 0), 10**6)

    assert dict(policy.branch_counts) == {branch: 4}
    assert policy.omega_sizes == [omega] * 200


def test_regret_is_sublinear(tmp_path: Path):
    logs = runner.compare(_config(tmp_path, run__agents=["mufasa", "random"]))
    mufasa = logs["mufasa"]
    assert _mean_at(mufasa, 2000) / 2000 < 0.6 * _mean_at(mufasa, 500) / 500
    assert _mean_final(mufasa) <= 0.5 * _mean_final(logs["random"])


def test_beats_baselines_on_nonlinear_rewards(tmp_path: Path):
    cfg = _config(
        tmp_path,
        env__sub_reward="square",
        env__final_reward="h2_weighted",
        env__c_bar=2.0,
        run__agents=["mufasa", "neuucb", "linucb"],
    )
    logs = runner.compare(cfg)
    mufasa = _mean_final(logs["mufasa"])
    assert mufasa < _mean_final(logs["neuucb"])
    assert mufasa <= 0.9 * _mean_final(logs["linucb"])


def test_prefers_the_heavier_bandit(tmp_path: Path):
    cfg = _config(
        tmp_path,
        env__sub_reward="indicator",
        env__final_reward="h2_weighted",
        env__arm_generation="tradeoff",
        env__arms=2,
    )
    preferred = 0
    total = 0
    for seed in SEEDS:
        env, policy = _mufasa(cfg, seed)
        for t in range(1, 2001):
            arms = env.gen_round(t)
            decision = policy.select(arms)
            indices = decision.combination.indices
            if t >= 1800:
                # every offered combination is (1, 0) or (0, 1): the first bandit decides which
                preferred += int(env.sub_reward(0, arms.arms[0][indices[0]]) == 1.0)
                total += 1

            observation = env.observe(arms, indices)
            policy.observe(RoundOutcome(t, decision.combination, observation.final_reward, observation.sub_rewards))

    assert preferred / total >= 0.7


def test_learns_without_sub_rewards(tmp_path: Path):
    logs = runner.compare(_config(tmp_path, env__mask="none", run__agents=["mufasa", "random"]))
    assert _mean_final(logs["mufasa"]) <= 0.7 * _mean_final(logs["random"])


def test_confidence_width_shrinks(tmp_path: Path):
    for log_ in runner.run(_config(tmp_path, run__seeds=[0])):
        widths = np.array([record.ucb_width for record in log_.records])
        assert widths[1499:].mean() < widths[:500].mean()
