"""
The assembled reward model 𝓕 = F ∘ (f_1, …, f_K).

Every bandit k has its own network f_k over its arm features. The shared
network F maps the concatenated sub-network outputs to a predicted final
reward. In `zero_init_mode` F sees the duplicated vector concat(f, f), which
together with its antisymmetric head makes 𝓕 vanish at initialization.

Two training procedures exist:

- `train_all` trains every f_k on its own sub-rewards and F on the true
  sub-reward vectors, used when every round reported all sub-rewards.
- `train_partial` trains 𝓕 end to end on the Ω samples built by
  `build_partial_samples`, used as soon as any sub-reward is missing.
"""

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import numpy.typing as npt

from . import mlp, toml
from .errors import ConfigError, ContractViolation, ParseError, UnsupportedConfiguration
from .log import LOG
from .mlp import NetParams, NetSpec, TrainConfig
from .tensor import Matrix, Vector

MANIFEST_NAME = "manifest.toml"


@dataclass(frozen=True)
class AssembledSpec:
    sub_specs: tuple[NetSpec, ...]
    shared_spec: NetSpec
    zero_init_mode: bool = True
    c_bar: float = 1.0

    def __post_init__(self):
        if not self.sub_specs:
            raise ConfigError("an assembled model needs at least one bandit")
        if self.c_bar <= 0:
            raise ConfigError(f"c_bar must be > 0, got {self.c_bar}")
        expected = self.sub_out_dim * (2 if self.zero_init_mode else 1)
        if self.shared_spec.in_dim != expected:
            raise ConfigError(f"shared network input dimension must be {expected}, got {self.shared_spec.in_dim}")
        if self.shared_spec.out_dim != 1:
            raise ConfigError("shared network must have a scalar output")

    @property
    def n_bandits(self) -> int:
        return len(self.sub_specs)

    @property
    def sub_out_dim(self) -> int:
        return sum(spec.out_dim for spec in self.sub_specs)

    @staticmethod
    def build(
        in_dims: Sequence[int],
        *,
        sub_depth: int = 2,
        sub_width: int = 32,
        sub_out: int = 1,
        shared_depth: int = 2,
        shared_width: int = 32,
        zero_init_mode: bool = True,
        c_bar: float = 1.0,
    ) -> "AssembledSpec":
        sub_specs = tuple(NetSpec(sub_depth, sub_width, d, sub_out) for d in in_dims)
        shared_in = sub_out * len(in_dims) * (2 if zero_init_mode else 1)
        shared_spec = NetSpec(shared_depth, shared_width, shared_in, 1, antisymmetric_head=True)
        return AssembledSpec(sub_specs, shared_spec, zero_init_mode, c_bar)


@dataclass(frozen=True)
class AssembledParams:
    shared: NetParams
    subs: tuple[NetParams, ...]

    def flat(self) -> Vector:
        """θ = (θ^Σ, θ^1, …, θ^K)"""

        return np.concatenate([self.shared.flat(), *[sub.flat() for sub in self.subs]])

    def theta0(self) -> Vector:
        return np.concatenate([self.shared.theta0, *[sub.theta0 for sub in self.subs]])

    def with_flat(self, spec: AssembledSpec, theta: Vector) -> "AssembledParams":
        offset = spec.shared_spec.n_params
        shared = self.shared.with_flat(spec.shared_spec, theta[:offset])
        subs: list[NetParams] = []
        for sub_spec, sub in zip(spec.sub_specs, self.subs):
            subs.append(sub.with_flat(sub_spec, theta[offset : offset + sub_spec.n_params]))
            offset += sub_spec.n_params
        return AssembledParams(shared, tuple(subs))

    def at_init(self, spec: AssembledSpec) -> "AssembledParams":
        return AssembledParams(
            self.shared.at_init(spec.shared_spec),
            tuple(sub.at_init(sub_spec) for sub_spec, sub in zip(spec.sub_specs, self.subs)),
        )


@dataclass(frozen=True)
class Combination:
    indices: tuple[int, ...]
    features: tuple[Vector, ...]


@dataclass(frozen=True)
class TrainingSample:
    inputs: tuple[Vector, ...]
    target: float


@dataclass(frozen=True)
class HistoryEntry:
    combination: Combination
    final_reward: float
    sub_rewards: Mapping[int, float] = field(default_factory=dict)

    def is_complete(self, n_bandits: int) -> bool:
        return len(self.sub_rewards) == n_bandits


def init_assembled(spec: AssembledSpec, seed: int) -> AssembledParams:
    shared_seq, *sub_seqs = np.random.SeedSequence(seed).spawn(spec.n_bandits + 1)
    return AssembledParams(
        mlp.init_params(spec.shared_spec, shared_seq),
        tuple(mlp.init_params(sub_spec, seq) for sub_spec, seq in zip(spec.sub_specs, sub_seqs)),
    )


def _check_features(spec: AssembledSpec, features: Sequence[Vector]):
    if len(features) != spec.n_bandits:
        raise ContractViolation(f"expected features for {spec.n_bandits} bandits, got {len(features)}")
    for k, (sub_spec, x) in enumerate(zip(spec.sub_specs, features)):
        if np.shape(x) != (sub_spec.in_dim,):
            raise ContractViolation(f"bandit {k} expects features of dimension {sub_spec.in_dim}, got {np.shape(x)}")


def shared_inputs(spec: AssembledSpec, sub_outputs: Matrix) -> Matrix:
    """The input of F for a batch of concatenated sub-network outputs (or sub-reward vectors)."""

    if spec.zero_init_mode:
        return np.concatenate([sub_outputs, sub_outputs], axis=1)
    return sub_outputs


def sub_outputs_batch(spec: AssembledSpec, params: AssembledParams, inputs: Sequence[npt.ArrayLike]) -> Matrix:
    """f_t for a batch, one row per sample; `inputs[k]` holds bandit k's features (n × d_k)."""

    outputs = [
        mlp.forward_batch(sub_spec, sub, x) for sub_spec, sub, x in zip(spec.sub_specs, params.subs, inputs, strict=True)
    ]
    return np.concatenate(outputs, axis=1)


def assembled_forward_batch(spec: AssembledSpec, params: AssembledParams, inputs: Sequence[npt.ArrayLike]) -> Vector:
    f_t = sub_outputs_batch(spec, params, inputs)
    return mlp.forward_batch(spec.shared_spec, params.shared, shared_inputs(spec, f_t))[:, 0]


def assembled_forward(spec: AssembledSpec, params: AssembledParams, combination: Combination) -> float:
    _check_features(spec, combination.features)
    return float(assembled_forward_batch(spec, params, [x[None, :] for x in combination.features])[0])


def grad_sub(spec: AssembledSpec, params: AssembledParams, combination: Combination, k: int) -> Vector:
    """∂f_k(x^k; θ^k)/∂θ^k, the sub-network on its own."""

    _check_features(spec, combination.features)
    sub_spec = spec.sub_specs[k]
    if sub_spec.out_dim != 1:
        raise UnsupportedConfiguration(
            f"per-bandit confidence bounds need scalar sub-network outputs (bandit {k} has out_dim={sub_spec.out_dim})"
        )
    return mlp.grad_params(sub_spec, params.subs[k], combination.features[k])


def grad_shared_batch(spec: AssembledSpec, params: AssembledParams, sub_outputs: Matrix) -> Matrix:
    """∂F/∂θ^Σ per row of concatenated sub-network outputs."""

    return mlp.grad_params_batch(spec.shared_spec, params.shared, shared_inputs(spec, sub_outputs))


def grad_shared(spec: AssembledSpec, params: AssembledParams, combination: Combination) -> Vector:
    _check_features(spec, combination.features)
    f_t = sub_outputs_batch(spec, params, [x[None, :] for x in combination.features])
    return grad_shared_batch(spec, params, f_t)[0]


def _check_complete(spec: AssembledSpec, history: Sequence[HistoryEntry]):
    for t, entry in enumerate(history):
        if not entry.is_complete(spec.n_bandits):
            raise ContractViolation(f"history entry {t} lacks sub-rewards; train end to end instead")


def train_subs(
    spec: AssembledSpec,
    params: AssembledParams,
    history: Sequence[HistoryEntry],
    cfg: TrainConfig,
) -> AssembledParams:
    """Train every f_k on its (x^k, r^k) pairs; the shared network is left as is."""

    if not history or cfg.steps == 0 or cfg.eta == 0.0:
        return params
    _check_complete(spec, history)

    subs: list[NetParams] = []
    for k, (sub_spec, sub) in enumerate(zip(spec.sub_specs, params.subs)):
        inputs = np.stack([entry.combination.features[k] for entry in history])
        targets = np.array([entry.sub_rewards[k] for entry in history])
        result = mlp.train(sub_spec, sub, inputs, targets, replace(cfg, m_scale=sub_spec.width))
        if result.losses:
            LOG.debug(f"bandit {k} network: loss {result.losses[0]:.4g} -> {result.losses[-1]:.4g}")
        subs.append(result.params)

    return AssembledParams(params.shared, tuple(subs))


def train_all(
    spec: AssembledSpec,
    params: AssembledParams,
    history: Sequence[HistoryEntry],
    cfg: TrainConfig,
) -> AssembledParams:
    """
    Train every f_k on (x^k, r^k) and F on (vec(r), R), each with its own
    m·λ ridge anchor.
    """

    if not history or cfg.steps == 0 or cfg.eta == 0.0:
        return params
    _check_complete(spec, history)
    if spec.sub_out_dim != spec.n_bandits:
        raise UnsupportedConfiguration("training on sub-reward vectors needs scalar sub-network outputs")

    params = train_subs(spec, params, history, cfg)

    reward_vectors = np.array([[entry.sub_rewards[k] for k in range(spec.n_bandits)] for entry in history])
    finals = np.array([entry.final_reward for entry in history])
    result = mlp.train(
        spec.shared_spec,
        params.shared,
        shared_inputs(spec, reward_vectors),
        finals,
        replace(cfg, m_scale=spec.shared_spec.width),
    )
    if result.losses:
        LOG.debug(f"shared network: loss {result.losses[0]:.4g} -> {result.losses[-1]:.4g}")

    return AssembledParams(result.params, params.subs)


def build_partial_samples(
    combination: Combination,
    final_reward: float,
    available: Mapping[int, float],
    c_bar: float,
) -> list[TrainingSample]:
    """
    The final-reward sample first, then one zero-padded sample per reported
    sub-reward (in bandit order) targeted at C̄·r^k.
    """

    n_bandits = len(combination.features)
    samples = [TrainingSample(combination.features, float(final_reward))]
    for k in sorted(available):
        if not 0 <= k < n_bandits:
            raise ContractViolation(f"sub-reward for unknown bandit {k} (K={n_bandits})")
        padded = tuple(x if j == k else np.zeros_like(x) for j, x in enumerate(combination.features))
        samples.append(TrainingSample(padded, c_bar * float(available[k])))
    return samples


def partial_loss_and_grad(
    spec: AssembledSpec,
    params: AssembledParams,
    samples: Sequence[TrainingSample],
) -> tuple[float, Vector]:
    """Σ (𝓕(X) − R)²/2 over `samples` and its gradient in the `AssembledParams.flat` layout."""

    inputs = [np.stack([sample.inputs[k] for sample in samples]) for k in range(spec.n_bandits)]
    targets = np.array([sample.target for sample in samples])

    sub_traces = [
        mlp.trace_batch(sub_spec, sub, x) for sub_spec, sub, x in zip(spec.sub_specs, params.subs, inputs)
    ]
    f_t = np.concatenate([trace.outputs for trace in sub_traces], axis=1)
    shared_trace = mlp.trace_batch(spec.shared_spec, params.shared, shared_inputs(spec, f_t))

    residual = shared_trace.outputs - targets[:, None]
    shared_grads, d_input = mlp.backward(spec.shared_spec, params.shared, shared_trace, residual)

    width = spec.sub_out_dim
    d_sub = d_input[:, :width] + d_input[:, width:] if spec.zero_init_mode else d_input

    grads = [mlp.flatten(shared_grads)]
    offset = 0
    for sub_spec, sub, trace in zip(spec.sub_specs, params.subs, sub_traces):
        upstream = d_sub[:, offset : offset + sub_spec.out_dim]
        sub_grads, _ = mlp.backward(sub_spec, sub, trace, upstream)
        grads.append(mlp.flatten(sub_grads))
        offset += sub_spec.out_dim

    return 0.5 * float(np.sum(residual**2)), np.concatenate(grads)


def train_partial(
    spec: AssembledSpec,
    params: AssembledParams,
    samples: Sequence[TrainingSample],
    cfg: TrainConfig,
) -> AssembledParams:
    """J gradient steps on the end-to-end loss over all Ω samples, anchored with m₂·λ."""

    if not samples or cfg.steps == 0 or cfg.eta == 0.0:
        return params

    def loss_and_grad(theta: Vector) -> tuple[float, Vector]:
        return partial_loss_and_grad(spec, params.with_flat(spec, theta), samples)

    cfg = replace(cfg, m_scale=spec.shared_spec.width)
    start = params.flat() if cfg.warm_start else params.theta0()
    theta, losses = mlp.gradient_descent(start, params.theta0(), loss_and_grad, cfg, len(samples), "end-to-end training")
    LOG.debug(f"assembled model: loss {losses[0]:.4g} -> {losses[-1]:.4g} on {len(samples)} samples")
    return params.with_flat(spec, theta)


def _component_files(spec: AssembledSpec) -> list[str]:
    return ["shared.toml", *[f"bandit_{k}.toml" for k in range(spec.n_bandits)]]


def save_assembled(directory: Path, spec: AssembledSpec, params: AssembledParams, seed: int | None = None):
    files = _component_files(spec)
    manifest = {
        "format": "mufasa-assembled",
        "bandits": spec.n_bandits,
        "zero_init_mode": spec.zero_init_mode,
        "c_bar": spec.c_bar,
        "components": files,
    }
    if seed is not None:
        manifest["seed"] = seed
    toml.dump_path(directory / MANIFEST_NAME, manifest)

    nets = [(spec.shared_spec, params.shared), *zip(spec.sub_specs, params.subs)]
    for name, (net_spec, net_params) in zip(files, nets):
        toml.dump_path(directory / name, mlp.params_to_dict(net_spec, net_params))


def load_assembled(directory: Path) -> tuple[AssembledSpec, AssembledParams]:
    manifest_path = directory / MANIFEST_NAME
    manifest = toml.load_path(manifest_path)
    if manifest.get("format") != "mufasa-assembled":
        raise ParseError(manifest_path, None, "not an assembled model manifest")

    components = manifest.get("components", [])
    if len(components) != manifest.get("bandits", -1) + 1:
        raise ParseError(manifest_path, None, "component list does not match the bandit count")

    nets: list[tuple[NetSpec, NetParams]] = []
    for name in components:
        path = directory / name
        net_spec, net_params, _ = mlp.params_from_dict(toml.load_path(path), str(path))
        nets.append((net_spec, net_params))

    (shared_spec, shared), *subs = nets
    try:
        spec = AssembledSpec(
            tuple(sub_spec for sub_spec, _ in subs),
            shared_spec,
            bool(manifest["zero_init_mode"]),
            float(manifest["c_bar"]),
        )
    except (KeyError, ConfigError) as exc:
        raise ParseError(manifest_path, None, f"inconsistent model ({exc})") from exc

    return spec, AssembledParams(shared, tuple(sub for _, sub in subs))
