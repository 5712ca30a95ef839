"""
Bias-free fully connected ReLU networks with √m output scaling:

    f(x; θ) = √m · W_L σ(W_{L-1} σ(… σ(W_1 x)))

Parameters are flattened in the order W_L, W_{L-1}, …, W_1, each matrix
row-major. Design matrices built from `grad_params` depend on this order,
so it is versioned in the serialized form (`FLATTEN_ORDER`).
"""

from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
import numpy.typing as npt

from . import toml
from .errors import ConfigError, ContractViolation, DivergenceError, ParseError, UnsupportedConfiguration
from .log import LOG
from .tensor import Matrix, Vector, as_matrix

FLATTEN_ORDER = "last-to-first/row-major/v1"
DIVERGENCE_LOSS = 1e12
BACKOFF_TOLERANCE = 1e-12


@dataclass(frozen=True)
class NetSpec:
    depth: int
    width: int
    in_dim: int
    out_dim: int = 1
    antisymmetric_head: bool = False

    def __post_init__(self):
        if self.depth < 1:
            raise ConfigError(f"network depth must be >= 1, got {self.depth}")
        if self.width < 2 or self.width % 2 != 0:
            raise ConfigError(f"network width must be even and >= 2, got {self.width}")
        if self.in_dim < 1:
            raise ConfigError(f"network input dimension must be >= 1, got {self.in_dim}")
        if self.out_dim < 1:
            raise ConfigError(f"network output dimension must be >= 1, got {self.out_dim}")
        if self.antisymmetric_head:
            head_cols = self.in_dim if self.depth == 1 else self.width
            if head_cols % 2 != 0:
                raise ConfigError(f"an antisymmetric head needs an even number of inputs, got {head_cols}")

    @property
    def scale(self) -> float:
        return float(np.sqrt(self.width))

    def shapes(self) -> list[tuple[int, int]]:
        """shapes of W_1 … W_L"""

        if self.depth == 1:
            return [(self.out_dim, self.in_dim)]
        return [
            (self.width, self.in_dim),
            *[(self.width, self.width)] * (self.depth - 2),
            (self.out_dim, self.width),
        ]

    @property
    def n_params(self) -> int:
        return sum(rows * cols for rows, cols in self.shapes())


@dataclass(frozen=True)
class NetParams:
    weights: tuple[Matrix, ...]
    """W_1 … W_L"""

    theta0: Vector
    """flattened initialization, the anchor of the ridge term"""

    def flat(self) -> Vector:
        return flatten(self.weights)

    def at_init(self, spec: NetSpec) -> "NetParams":
        return NetParams(unflatten(spec, self.theta0), self.theta0)

    def with_flat(self, spec: NetSpec, theta: Vector) -> "NetParams":
        return NetParams(unflatten(spec, theta), self.theta0)


@dataclass(frozen=True)
class TrainConfig:
    eta: float = 0.01
    steps: int = 100
    """number of gradient steps J"""
    lambda_reg: float = 1.0
    m_scale: float = 1.0
    """width entering the m·λ‖θ − θ₀‖²/2 ridge coefficient"""
    warm_start: bool = True
    normalize_step: bool = True
    """step with η/n on the summed loss instead of η"""
    max_backoffs: int = 0
    """step size halvings allowed per call when a step increases the loss; 0 is plain gradient descent"""

    def __post_init__(self):
        if self.eta < 0:
            raise ConfigError(f"learning rate must be >= 0, got {self.eta}")
        if self.steps < 0:
            raise ConfigError(f"number of gradient steps must be >= 0, got {self.steps}")
        if self.lambda_reg < 0:
            raise ConfigError(f"ridge weight must be >= 0, got {self.lambda_reg}")
        if self.max_backoffs < 0:
            raise ConfigError(f"number of step size halvings must be >= 0, got {self.max_backoffs}")

    def learning_rate(self, n_samples: int) -> float:
        if self.normalize_step:
            return self.eta / max(n_samples, 1)
        return self.eta


@dataclass
class TrainResult:
    params: NetParams
    losses: list[float] = field(default_factory=list)


def _frozen(arr: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    arr.setflags(write=False)
    return arr


def flatten(weights: Sequence[Matrix]) -> Vector:
    return np.concatenate([w.ravel() for w in reversed(weights)])


def unflatten(spec: NetSpec, theta: Vector) -> tuple[Matrix, ...]:
    if theta.shape != (spec.n_params,):
        raise ContractViolation(f"expected {spec.n_params} parameters, got {theta.shape}")

    weights: list[Matrix] = []
    offset = 0
    for rows, cols in reversed(spec.shapes()):
        size = rows * cols
        weights.append(_frozen(np.array(theta[offset : offset + size]).reshape(rows, cols)))
        offset += size
    return tuple(reversed(weights))


def _mirrored_block(rng: np.random.Generator, rows: int, cols: int, width: int) -> Matrix:
    if rows % 2 == 0 and cols % 2 == 0:
        w = rng.normal(0.0, np.sqrt(4.0 / width), size=(rows // 2, cols // 2))
        zeros = np.zeros_like(w)
        return np.block([[w, zeros], [zeros, w]])
    # odd dimensions have no mirrored split
    return rng.normal(0.0, np.sqrt(2.0 / width), size=(rows, cols))


def _antisymmetric_head(rng: np.random.Generator, rows: int, cols: int, width: int) -> Matrix:
    w = rng.normal(0.0, np.sqrt(2.0 / width), size=(rows, cols // 2))
    return np.concatenate([w, -w], axis=1)


def init_params(spec: NetSpec, seed: int | np.random.SeedSequence) -> NetParams:
    rng = np.random.default_rng(seed)

    weights: list[Matrix] = []
    for layer, (rows, cols) in enumerate(spec.shapes()):
        if layer == spec.depth - 1 and spec.antisymmetric_head:
            weights.append(_frozen(_antisymmetric_head(rng, rows, cols, spec.width)))
        else:
            weights.append(_frozen(_mirrored_block(rng, rows, cols, spec.width)))

    return NetParams(tuple(weights), _frozen(flatten(weights)))


@dataclass
class Trace:
    activations: list[Matrix]
    """a_0 = inputs, a_l = σ(z_l) for hidden layers"""
    preacts: list[Matrix]
    """z_l = a_{l-1} W_lᵀ for hidden layers"""
    outputs: Matrix


def trace_batch(spec: NetSpec, params: NetParams, inputs: Matrix) -> Trace:
    if inputs.ndim != 2 or inputs.shape[1] != spec.in_dim:
        raise ContractViolation(f"network expects inputs of dimension {spec.in_dim}, got shape {inputs.shape}")

    activations = [inputs]
    preacts: list[Matrix] = []
    hidden = inputs
    for w in params.weights[:-1]:
        z = hidden @ w.T
        preacts.append(z)
        hidden = np.maximum(z, 0.0)
        activations.append(hidden)

    outputs = spec.scale * (hidden @ params.weights[-1].T)
    return Trace(activations, preacts, outputs)


def backward(spec: NetSpec, params: NetParams, trace: Trace, upstream: Matrix) -> tuple[list[Matrix], Matrix]:
    """
    Vector-Jacobian product of the batch outputs with `upstream` (n × out_dim).

    Returns the weight gradients (W_1 … W_L order, summed over the batch) and
    the per-sample gradient with respect to the inputs.
    """

    grads: list[Matrix] = [np.empty((0, 0))] * spec.depth
    grads[-1] = spec.scale * upstream.T @ trace.activations[-1]
    delta = spec.scale * upstream @ params.weights[-1]

    for layer in range(spec.depth - 2, -1, -1):
        delta_z = delta * (trace.preacts[layer] > 0.0)
        grads[layer] = delta_z.T @ trace.activations[layer]
        delta = delta_z @ params.weights[layer]

    return grads, delta


def forward_batch(spec: NetSpec, params: NetParams, inputs: npt.ArrayLike) -> Matrix:
    return trace_batch(spec, params, as_matrix(inputs)).outputs


def forward(spec: NetSpec, params: NetParams, x: npt.ArrayLike) -> Vector:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (spec.in_dim,):
        raise ContractViolation(f"network expects an input of dimension {spec.in_dim}, got shape {x.shape}")
    return forward_batch(spec, params, x[None, :])[0]


def grad_params_batch(spec: NetSpec, params: NetParams, inputs: npt.ArrayLike) -> Matrix:
    """Per-sample flattened gradients ∂f(x_i)/∂θ, one row per input."""

    if spec.out_dim != 1:
        raise UnsupportedConfiguration(
            f"parameter gradients need a scalar network output (got out_dim={spec.out_dim}); "
            "differentiate each output separately"
        )

    trace = trace_batch(spec, params, as_matrix(inputs))
    n = trace.outputs.shape[0]

    blocks: list[Matrix] = [spec.scale * trace.activations[-1]]
    delta = np.broadcast_to(spec.scale * params.weights[-1][0], (n, params.weights[-1].shape[1]))
    for layer in range(spec.depth - 2, -1, -1):
        delta_z = delta * (trace.preacts[layer] > 0.0)
        blocks.append(np.einsum("ni,nj->nij", delta_z, trace.activations[layer]).reshape(n, -1))
        delta = delta_z @ params.weights[layer]

    return np.concatenate(blocks, axis=1)


def grad_params(spec: NetSpec, params: NetParams, x: npt.ArrayLike) -> Vector:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (spec.in_dim,):
        raise ContractViolation(f"network expects an input of dimension {spec.in_dim}, got shape {x.shape}")
    return grad_params_batch(spec, params, x[None, :])[0]


def gradient_descent(
    theta_start: Vector,
    theta0: Vector,
    loss_and_grad: Callable[[Vector], tuple[float, Vector]],
    cfg: TrainConfig,
    n_samples: int,
    what: str,
) -> tuple[Vector, list[float]]:
    """
    Full-batch gradient descent on `loss_and_grad(θ) + m·λ‖θ − θ₀‖²/2`.

    With `cfg.max_backoffs > 0` a step that would increase the loss is retried
    with half the step size, at most `max_backoffs` times per call; the halved
    step size is kept for the remaining steps.

    The returned loss trace has J + 1 entries, the first one being the loss
    at the starting point.
    """

    reg = cfg.m_scale * cfg.lambda_reg
    lr = cfg.learning_rate(n_samples)

    def objective(theta: Vector) -> tuple[float, Vector]:
        data_loss, data_grad = loss_and_grad(theta)
        diff = theta - theta0
        return data_loss + 0.5 * reg * float(diff @ diff), data_grad + reg * diff

    theta = theta_start.copy()
    loss, grad = objective(theta)
    if not np.isfinite(loss) or loss > DIVERGENCE_LOSS:
        raise DivergenceError(what, 0, loss)
    losses = [loss]

    backoffs = 0
    for step in range(1, cfg.steps + 1):
        while True:
            candidate = theta - lr * grad
            candidate_loss, candidate_grad = objective(candidate)
            rejected = not np.isfinite(candidate_loss) or candidate_loss > loss * (1.0 + BACKOFF_TOLERANCE)
            if cfg.max_backoffs == 0 or not rejected:
                break
            if backoffs == cfg.max_backoffs:
                raise DivergenceError(what, step, candidate_loss)
            backoffs += 1
            lr /= 2.0

        if not np.isfinite(candidate_loss) or candidate_loss > DIVERGENCE_LOSS:
            raise DivergenceError(what, step, candidate_loss)
        theta, loss, grad = candidate, candidate_loss, candidate_grad
        losses.append(loss)

    if backoffs:
        LOG.warn("step_size_halved", f"{what}: step size halved {backoffs} times to {lr:.3g}")
    return theta, losses


def train(
    spec: NetSpec,
    params: NetParams,
    inputs: Sequence[npt.ArrayLike] | Matrix,
    targets: Sequence[float] | Vector,
    cfg: TrainConfig,
) -> TrainResult:
    """J gradient steps on Σᵢ (f(xᵢ) − rᵢ)²/2 + m·λ‖θ − θ₀‖²/2."""

    x = np.asarray(inputs, dtype=np.float64).reshape(len(inputs), spec.in_dim) if len(inputs) else None
    y = np.asarray(targets, dtype=np.float64).reshape(-1)
    if x is None or y.shape[0] == 0:
        if y.shape[0] != 0:
            raise ContractViolation("train: got targets without inputs")
        return TrainResult(params)
    if x.shape[0] != y.shape[0]:
        raise ContractViolation(f"train: {x.shape[0]} inputs but {y.shape[0]} targets")
    if spec.out_dim != 1:
        raise UnsupportedConfiguration("train: scalar targets need a network with out_dim=1")
    if cfg.steps == 0 or cfg.eta == 0.0:
        return TrainResult(params)

    def loss_and_grad(theta: Vector) -> tuple[float, Vector]:
        current = params.with_flat(spec, theta)
        trace = trace_batch(spec, current, x)
        residual = trace.outputs - y[:, None]
        grads, _ = backward(spec, current, trace, residual)
        return 0.5 * float(np.sum(residual**2)), flatten(grads)

    start = params.flat() if cfg.warm_start else params.theta0
    theta, losses = gradient_descent(start, params.theta0, loss_and_grad, cfg, x.shape[0], "network training")
    return TrainResult(params.with_flat(spec, theta), losses)


def params_to_dict(spec: NetSpec, params: NetParams, seed: int | None = None) -> dict[str, Any]:
    obj: dict[str, Any] = {
        "format": "mufasa-net",
        "flatten_order": FLATTEN_ORDER,
        "spec": {
            "depth": spec.depth,
            "width": spec.width,
            "in_dim": spec.in_dim,
            "out_dim": spec.out_dim,
            "antisymmetric_head": spec.antisymmetric_head,
        },
        "theta": [float(v) for v in params.flat()],
        "theta0": [float(v) for v in params.theta0],
    }
    if seed is not None:
        obj["seed"] = seed
    return obj


def params_from_dict(obj: dict[str, Any], origin: str = "<memory>") -> tuple[NetSpec, NetParams, int | None]:
    if obj.get("format") != "mufasa-net":
        raise ParseError(origin, None, "not a mufasa network file")
    if obj.get("flatten_order") != FLATTEN_ORDER:
        raise ParseError(origin, None, f"unsupported flatten order {obj.get('flatten_order')!r}")

    try:
        spec = NetSpec(**obj["spec"])
        theta = np.asarray(obj["theta"], dtype=np.float64)
        theta0 = _frozen(np.asarray(obj["theta0"], dtype=np.float64))
        params = NetParams(unflatten(spec, theta), theta0)
        if theta0.shape != theta.shape:
            raise ContractViolation("theta0 and theta differ in length")
    except (KeyError, TypeError, ContractViolation, ConfigError) as exc:
        raise ParseError(origin, None, f"malformed network file ({exc})") from exc

    return spec, params, obj.get("seed")


def dumps_params(spec: NetSpec, params: NetParams, seed: int | None = None) -> str:
    return toml.dumps(params_to_dict(spec, params, seed))


def loads_params(raw: str, origin: str = "<memory>") -> tuple[NetSpec, NetParams, int | None]:
    return params_from_dict(toml.loads(raw), origin)
