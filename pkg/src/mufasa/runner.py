"""
Experiment loops: build the environment and the agents from a validated
config, play seeded runs round by round, and write the run logs and
summaries.
"""

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .agents import POLICIES, KerUcbPolicy, LinUcbPolicy, MufasaPolicy, NeuUcbPolicy, Policy, RandomPolicy
from .agents.base import RoundOutcome
from .assembly import AssembledSpec, save_assembled
from .config import ValidatedConfig
from .config.show import fmt_config_dict
from .confidence import UcbConfig
from .dataset import Dataset, ingest_csv
from .envs import BanditSpec, EnvSpec, Environment
from .errors import ConfigError, DivergenceError
from .log import LOG
from .mlp import NetSpec, TrainConfig
from .runlog import RoundRecord, RunLog, fmt_float

THREADS_ENV = "MUFASA_THREADS"
SUMMARY_NAME = "summary.csv"
COMPARE_NAME = "compare.csv"
REGRET_TOLERANCE = 1e-12


@dataclass(frozen=True)
class CurvePoint:
    t: int
    agent: str
    mean_cum_regret: float
    std: float


def build_env_spec(cfg: ValidatedConfig) -> EnvSpec:
    generation = cfg.env.arm_generation
    assert generation is not None

    datasets: list[Dataset | None] = [None] * cfg.n_bandits
    if generation == "dataset":
        cache: dict[Path, Dataset] = {}
        for k, path in enumerate(cfg.dataset_paths()):
            if path not in cache:
                cache[path] = ingest_csv(path, cfg.env.dataset_classes or None)
            datasets[k] = cache[path]

    bandits: list[BanditSpec] = []
    for dim, n_arms, kind, dataset in zip(
        cfg.per_bandit("env.dim"), cfg.per_bandit("env.arms"), cfg.per_bandit("env.sub_reward"), datasets
    ):
        if dataset is not None:
            dim = dataset.dim * dataset.n_classes
        bandits.append(BanditSpec(dim, n_arms, kind, dataset=dataset))

    weights = tuple(float(w) for w in cfg.env.weights or ()) or None
    return EnvSpec(
        tuple(bandits),
        final=cfg.env.final_reward,  # type: ignore[arg-type]
        weights=weights,
        c_bar=cfg.c_bar(),
        noise_sigma=float(cfg.env.noise_sigma or 0.0),
        sub_noise_sigma=float(cfg.env.sub_noise_sigma or 0.0),
        mask=cfg.mask(),  # type: ignore[arg-type]
        arms=generation,  # type: ignore[arg-type]
    )


def build_ucb_config(cfg: ValidatedConfig, c_bar: float) -> UcbConfig:
    agent = cfg.agent
    return UcbConfig(
        mode=agent.ucb_mode,  # type: ignore[arg-type]
        delta=float(agent.delta or 0.0),
        norm_bound=float(agent.norm_bound or 0.0),
        c_bar=c_bar,
        exploration=float(agent.exploration or 0.0),
        schedule=agent.schedule,  # type: ignore[arg-type]
        schedule_constant=float(agent.schedule_constant or 0.0),
        c_l=float(agent.c_l or 0.0),
        c_1=float(agent.c_1 or 0.0),
        c_2=float(agent.c_2 or 0.0),
        eta=float(agent.eta or 0.0),
        steps=int(agent.steps or 0),
        ridge=float(agent.lambda_reg or 0.0),
    )


def build_train_config(cfg: ValidatedConfig) -> TrainConfig:
    agent = cfg.agent
    return TrainConfig(
        eta=float(agent.eta or 0.0),
        steps=int(agent.steps or 0),
        lambda_reg=float(agent.lambda_reg or 0.0),
        warm_start=bool(agent.warm_start),
        normalize_step=bool(agent.normalize_step),
        max_backoffs=int(agent.step_backoffs or 0),
    )


def build_assembled_spec(cfg: ValidatedConfig, env_spec: EnvSpec) -> AssembledSpec:
    agent = cfg.agent
    assert agent.sub_depth and agent.sub_width and agent.shared_depth and agent.shared_width
    return AssembledSpec.build(
        [bandit.dim for bandit in env_spec.bandits],
        sub_depth=agent.sub_depth,
        sub_width=agent.sub_width,
        shared_depth=agent.shared_depth,
        shared_width=agent.shared_width,
        zero_init_mode=bool(agent.zero_init_mode),
        c_bar=env_spec.effective_c_bar,
    )


def build_policy(cfg: ValidatedConfig, kind: str, env_spec: EnvSpec, seed: int) -> Policy:
    if kind not in POLICIES:
        raise ConfigError(f"agent.kind: unknown agent {kind!r}")

    agent = cfg.agent
    dims = [bandit.dim for bandit in env_spec.bandits]
    lam = float(agent.lambda_reg or 0.0)

    if kind == "mufasa":
        return MufasaPolicy(
            build_assembled_spec(cfg, env_spec),
            build_ucb_config(cfg, env_spec.effective_c_bar),
            build_train_config(cfg),
            seed,
            train_every=int(agent.train_every or 1),
            max_history=cfg.max_history(),
            recompute_design=bool(agent.recompute_design),
            shared_net=bool(agent.shared_net),
            combination_cap=int(agent.combination_cap or 1),
        )
    if kind == "neuucb":
        assert agent.neuucb_depth and agent.neuucb_width
        return NeuUcbPolicy(
            [NetSpec(agent.neuucb_depth, agent.neuucb_width, dim) for dim in dims],
            build_ucb_config(cfg, 1.0),
            build_train_config(cfg),
            seed,
            train_every=int(agent.train_every or 1),
            max_history=cfg.max_history(),
        )
    if kind == "linucb":
        return LinUcbPolicy(dims, alpha=float(agent.alpha or 0.0), lam=lam)
    if kind == "kerucb":
        return KerUcbPolicy(
            env_spec.n_bandits,
            bandwidth=float(agent.kernel_bandwidth or 0.0),
            beta=float(agent.kernel_beta or 0.0),
            budget=int(agent.kernel_budget or 0),
            lam=lam,
        )
    return RandomPolicy(seed)


def play(env: Environment, policy: Policy, rounds: int, log: RunLog, cap: int):
    """Play `rounds` rounds, appending one record per round to `log`."""

    cum_regret = 0.0
    for t in range(1, rounds + 1):
        arms = env.gen_round(t)
        decision = policy.select(arms)
        indices = decision.combination.indices
        observation = env.observe(arms, indices)
        _, h_star = env.oracle_best(arms, cap)

        regret = h_star - observation.h_clean
        if -REGRET_TOLERANCE < regret < 0.0:
            regret = 0.0
        cum_regret += regret

        policy.observe(
            RoundOutcome(
                t,
                decision.combination,
                observation.final_reward,
                observation.sub_rewards,
                decision.ucb,
                decision.predicted,
                observation.h_clean,
                h_star,
            )
        )

        ucb = decision.ucb
        log.append(
            RoundRecord(
                t=t,
                choice=indices,
                final_reward=observation.final_reward,
                h_clean=observation.h_clean,
                h_star=h_star,
                regret=regret,
                cum_regret=cum_regret,
                ucb_width=ucb.total if ucb is not None else 0.0,
                branch=policy.branch(),
                predicted=decision.predicted,
                ucb_per_bandit=ucb.per_bandit if ucb is not None else (),
                ucb_shared=ucb.shared if ucb is not None else 0.0,
                bandit_regret=env.per_bandit_regret(arms, indices),
            )
        )


def run_seed(cfg: ValidatedConfig, env_spec: EnvSpec, kind: str, seed: int, outdir: Path) -> RunLog:
    """
    One seeded run of one agent. The log is written to `outdir` when the run
    finishes, and also when training diverges, before the error propagates.
    """

    snapshot = fmt_config_dict(cfg)
    snapshot.get("agent", {})["kind"] = kind
    log = RunLog(kind, seed, config=snapshot)

    env = Environment(env_spec, seed)
    policy = build_policy(cfg, kind, env_spec, seed)
    assert cfg.run.rounds is not None
    try:
        play(env, policy, cfg.run.rounds, log, int(cfg.agent.combination_cap or 1))
    except DivergenceError:
        log.write(outdir)
        LOG.info(f"[red]{kind} seed {seed} diverged[/red], partial log written for {len(log.records)} rounds")
        raise

    log.write(outdir)
    if cfg.run.save_model and isinstance(policy, MufasaPolicy):
        save_assembled(outdir / f"{log.stem()}.model", policy.spec, policy.params, seed)
    LOG.debug(f"{kind} seed {seed}: cumulative regret {log.cum_regret}")
    return log


def thread_count(cfg: ValidatedConfig) -> int:
    if cfg.run.threads:
        return cfg.run.threads
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        threads = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{THREADS_ENV}: expected an integer, got {raw!r}") from exc
    return max(threads, 1)


def run_agent(cfg: ValidatedConfig, env_spec: EnvSpec, kind: str, outdir: Path) -> list[RunLog]:
    """All seeds of one agent, in seed order."""

    seeds = list(cfg.run.seeds or [])
    threads = min(thread_count(cfg), len(seeds))
    if threads <= 1:
        return [run_seed(cfg, env_spec, kind, seed, outdir) for seed in seeds]

    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda seed: run_seed(cfg, env_spec, kind, seed, outdir), seeds))


def write_summary(path: Path, logs_by_agent: dict[str, list[RunLog]]):
    """
    Final cumulative regret of every run, followed by the mean and the
    standard deviation over seeds of each agent.
    """

    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as file:
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(["agent", "seed", "cum_regret"])
        for agent, logs in logs_by_agent.items():
            finals = [log.cum_regret or 0.0 for log in logs]
            for log, final in zip(logs, finals):
                writer.writerow([agent, log.seed, fmt_float(final)])
            writer.writerow([agent, "mean", fmt_float(float(np.mean(finals)))])
            writer.writerow([agent, "std", fmt_float(float(np.std(finals)))])


def run(cfg: ValidatedConfig) -> list[RunLog]:
    assert cfg.agent.kind is not None and cfg.run.outdir is not None
    outdir = Path(cfg.run.outdir)
    env_spec = build_env_spec(cfg)
    logs = run_agent(cfg, env_spec, cfg.agent.kind, outdir)
    write_summary(outdir / SUMMARY_NAME, {cfg.agent.kind: logs})
    return logs


def aggregate_curves(logs_by_agent: dict[str, list[RunLog]]) -> list[CurvePoint]:
    """
    Mean and standard deviation of the cumulative regret of each agent at every
    round, agents in the given order. All agents must cover the same seeds.
    """

    points: list[CurvePoint] = []
    seeds: list[int] | None = None
    for agent, logs in logs_by_agent.items():
        agent_seeds = [log.seed for log in logs]
        if seeds is None:
            seeds = agent_seeds
        elif sorted(agent_seeds) != sorted(seeds):
            raise ConfigError(f"agent {agent} ran seeds {agent_seeds}, expected {seeds}")
        if not logs:
            continue

        lengths = {len(log.records) for log in logs}
        if len(lengths) != 1:
            raise ConfigError(f"agent {agent} has runs of different lengths {sorted(lengths)}")

        curves = np.array([[record.cum_regret or 0.0 for record in log.records] for log in logs])
        means = curves.mean(axis=0)
        stds = curves.std(axis=0)
        for i, record in enumerate(logs[0].records):
            points.append(CurvePoint(record.t, agent, float(means[i]), float(stds[i])))
    return points


def write_curves(path: Path, points: list[CurvePoint]):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as file:
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(["t", "agent", "mean_cum_regret", "std"])
        for point in points:
            writer.writerow([point.t, point.agent, fmt_float(point.mean_cum_regret), fmt_float(point.std)])


def compare(cfg: ValidatedConfig) -> dict[str, list[RunLog]]:
    """Run every configured agent on the same environment and seeds."""

    assert cfg.run.outdir is not None
    outdir = Path(cfg.run.outdir)
    env_spec = build_env_spec(cfg)

    logs_by_agent: dict[str, list[RunLog]] = {}
    for kind in cfg.agent_kinds():
        LOG.info(f"running {kind} on {len(cfg.run.seeds or [])} seeds")
        logs_by_agent[kind] = run_agent(cfg, env_spec, kind, outdir)

    write_summary(outdir / SUMMARY_NAME, logs_by_agent)
    write_curves(outdir / COMPARE_NAME, aggregate_curves(logs_by_agent))
    return logs_by_agent


def summary_rows(logs_by_agent: dict[str, list[RunLog]]) -> list[tuple[str, float, float]]:
    """(agent, mean, std) of the final cumulative regret, for console tables"""

    rows: list[tuple[str, float, float]] = []
    for agent, logs in logs_by_agent.items():
        finals = [log.cum_regret or 0.0 for log in logs]
        rows.append((agent, float(np.mean(finals)), float(np.std(finals))))
    return rows
