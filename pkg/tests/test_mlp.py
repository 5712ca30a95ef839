import numpy as np
import pytest

from mufasa import mlp
from mufasa.errors import ConfigError, ContractViolation, DivergenceError, ParseError, UnsupportedConfiguration
from mufasa.log import LOG
from mufasa.mlp import NetSpec, TrainConfig


@pytest.mark.parametrize(
    ("spec", "expected"),
    [
        pytest.param(NetSpec(1, 2, 3), [(1, 3)], id="linear"),
        pytest.param(NetSpec(2, 4, 3), [(4, 3), (1, 4)], id="one-hidden"),
        pytest.param(NetSpec(3, 6, 5, 2), [(6, 5), (6, 6), (2, 6)], id="two-hidden"),
    ],
)
def test_shapes(spec: NetSpec, expected: list[tuple[int, int]]):
    assert spec.shapes() == expected
    assert spec.n_params == sum(r * c for r, c in expected)


@pytest.mark.parametrize(
    ("kwargs", "match"),
    [
        pytest.param({"depth": 0, "width": 4, "in_dim": 2}, "depth must be >= 1", id="depth"),
        pytest.param({"depth": 2, "width": 3, "in_dim": 2}, "width must be even", id="odd-width"),
        pytest.param({"depth": 2, "width": 4, "in_dim": 0}, "input dimension", id="in-dim"),
        pytest.param(
            {"depth": 1, "width": 4, "in_dim": 3, "antisymmetric_head": True}, "even number of inputs", id="head"
        ),
    ],
)
def test_spec_rejects(kwargs: dict, match: str):
    with pytest.raises(ConfigError, match=match):
        NetSpec(**kwargs)


def test_flatten_order():
    spec = NetSpec(2, 2, 3)
    w1 = np.arange(6, dtype=float).reshape(2, 3)
    w2 = np.array([[10.0, 20.0]])
    theta = mlp.flatten([w1, w2])

    # last layer first, each matrix row-major
    np.testing.assert_array_equal(theta, [10.0, 20.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0])
    restored = mlp.unflatten(spec, theta)
    np.testing.assert_array_equal(restored[0], w1)
    np.testing.assert_array_equal(restored[1], w2)


def test_unflatten_wrong_length():
    with pytest.raises(ContractViolation, match="expected 8 parameters"):
        mlp.unflatten(NetSpec(2, 2, 3), np.zeros(7))


def test_init_is_deterministic():
    spec = NetSpec(3, 8, 4)
    a = mlp.init_params(spec, 42)
    b = mlp.init_params(spec, 42)
    c = mlp.init_params(spec, 43)
    np.testing.assert_array_equal(a.flat(), b.flat())
    assert not np.array_equal(a.flat(), c.flat())
    np.testing.assert_array_equal(a.flat(), a.theta0)


def test_init_mirrored_blocks():
    spec = NetSpec(3, 6, 4)
    params = mlp.init_params(spec, 1)
    for w in params.weights[:-1]:
        rows, cols = w.shape
        top, bottom = w[: rows // 2], w[rows // 2 :]
        np.testing.assert_array_equal(top[:, : cols // 2], bottom[:, cols // 2 :])
        assert not np.any(top[:, cols // 2 :])
        assert not np.any(bottom[:, : cols // 2])


def test_init_variance():
    width = 1000
    params = mlp.init_params(NetSpec(2, width, 20), 0)
    block = params.weights[0][: width // 2, :10]
    assert np.var(block) == pytest.approx(4.0 / width, rel=0.1)

    head = params.weights[1]
    assert np.var(head) == pytest.approx(2.0 / width, rel=0.2)


@pytest.mark.parametrize("depth", [2, 3])
def test_antisymmetric_head_vanishes_on_duplicated_input(depth: int):
    spec = NetSpec(depth, 8, 4, antisymmetric_head=True)
    params = mlp.init_params(spec, 5)
    head = params.weights[-1]
    np.testing.assert_array_equal(head[:, :4], -head[:, 4:])

    half = np.random.default_rng(0).normal(size=(10, 2))
    out = mlp.forward_batch(spec, params, np.concatenate([half, half], axis=1))
    np.testing.assert_allclose(out, 0.0, atol=1e-12)


def test_forward_batch_matches_single():
    spec = NetSpec(3, 8, 5)
    params = mlp.init_params(spec, 9)
    x = np.random.default_rng(1).normal(size=(6, 5))
    batch = mlp.forward_batch(spec, params, x)
    assert batch.shape == (6, 1)
    for row, out in zip(x, batch):
        np.testing.assert_allclose(mlp.forward(spec, params, row), out, rtol=1e-12)


def test_forward_wrong_dimension():
    spec = NetSpec(2, 4, 3)
    params = mlp.init_params(spec, 0)
    with pytest.raises(ContractViolation, match="dimension 3"):
        mlp.forward(spec, params, np.zeros(2))


def _numeric_grad(spec: NetSpec, params: mlp.NetParams, x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    theta = params.flat()
    grad = np.empty_like(theta)
    for i in range(theta.shape[0]):
        step = np.zeros_like(theta)
        step[i] = eps
        plus = mlp.forward(spec, params.with_flat(spec, theta + step), x)[0]
        minus = mlp.forward(spec, params.with_flat(spec, theta - step), x)[0]
        grad[i] = (plus - minus) / (2 * eps)
    return grad


@pytest.mark.parametrize("depth", [1, 2, 3])
def test_grad_params_matches_finite_differences(depth: int):
    spec = NetSpec(depth, 6, 4)
    params = mlp.init_params(spec, 3)
    x = np.random.default_rng(2).normal(size=4)
    np.testing.assert_allclose(mlp.grad_params(spec, params, x), _numeric_grad(spec, params, x), rtol=1e-5, atol=1e-7)


def test_grad_params_batch_matches_single():
    spec = NetSpec(2, 6, 3)
    params = mlp.init_params(spec, 4)
    x = np.random.default_rng(3).normal(size=(5, 3))
    batch = mlp.grad_params_batch(spec, params, x)
    assert batch.shape == (5, spec.n_params)
    for row, grad in zip(x, batch):
        np.testing.assert_allclose(mlp.grad_params(spec, params, row), grad, rtol=1e-12)


def test_backward_input_gradient():
    spec = NetSpec(3, 6, 4)
    params = mlp.init_params(spec, 6)
    x = np.random.default_rng(4).normal(size=(1, 4))
    trace = mlp.trace_batch(spec, params, x)
    _, d_input = mlp.backward(spec, params, trace, np.ones((1, 1)))

    eps = 1e-6
    numeric = np.empty(4)
    for i in range(4):
        step = np.zeros(4)
        step[i] = eps
        numeric[i] = (mlp.forward(spec, params, x[0] + step)[0] - mlp.forward(spec, params, x[0] - step)[0]) / (2 * eps)
    np.testing.assert_allclose(d_input[0], numeric, rtol=1e-5, atol=1e-7)


def test_grad_params_needs_scalar_output():
    spec = NetSpec(2, 4, 3, out_dim=2)
    params = mlp.init_params(spec, 0)
    with pytest.raises(UnsupportedConfiguration, match="scalar network output"):
        mlp.grad_params_batch(spec, params, np.ones((1, 3)))


def test_learning_rate():
    assert TrainConfig(eta=0.01).learning_rate(4) == pytest.approx(0.0025)
    assert TrainConfig(eta=0.01, normalize_step=False).learning_rate(4) == 0.01
    assert TrainConfig(eta=0.01).learning_rate(0) == 0.01


def test_train_config_rejects_negative():
    with pytest.raises(ConfigError, match="learning rate"):
        TrainConfig(eta=-1.0)
    with pytest.raises(ConfigError, match="gradient steps"):
        TrainConfig(steps=-1)
    with pytest.raises(ConfigError, match="step size halvings"):
        TrainConfig(max_backoffs=-1)


def test_train_reduces_loss():
    spec = NetSpec(2, 16, 3)
    params = mlp.init_params(spec, 0)
    rng = np.random.default_rng(0)
    x = rng.normal(size=(20, 3))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    y = x @ np.array([0.5, -0.3, 0.2])

    result = mlp.train(spec, params, x, y, TrainConfig(eta=1e-3, steps=200, lambda_reg=0.001))
    assert len(result.losses) == 201
    assert result.losses[-1] < result.losses[0]
    assert all(after <= before + 1e-9 for before, after in zip(result.losses, result.losses[1:]))
    np.testing.assert_array_equal(result.params.theta0, params.theta0)


def test_train_at_fixed_point():
    spec = NetSpec(2, 8, 3)
    params = mlp.init_params(spec, 2)
    x = np.random.default_rng(1).normal(size=(4, 3))
    y = mlp.forward_batch(spec, params, x)[:, 0]

    result = mlp.train(spec, params, x, y, TrainConfig(steps=5))
    assert result.losses == [0.0] * 6
    np.testing.assert_array_equal(result.params.flat(), params.flat())


@pytest.mark.parametrize(
    "cfg",
    [
        pytest.param(TrainConfig(steps=0), id="no-steps"),
        pytest.param(TrainConfig(eta=0.0), id="no-rate"),
    ],
)
def test_train_noop(cfg: TrainConfig):
    spec = NetSpec(2, 4, 2)
    params = mlp.init_params(spec, 0)
    result = mlp.train(spec, params, np.ones((3, 2)), np.ones(3), cfg)
    assert result.params is params
    assert not result.losses


def test_train_empty():
    spec = NetSpec(2, 4, 2)
    params = mlp.init_params(spec, 0)
    assert mlp.train(spec, params, [], [], TrainConfig()).params is params


def test_train_mismatched_targets():
    spec = NetSpec(2, 4, 2)
    with pytest.raises(ContractViolation, match="3 inputs but 2 targets"):
        mlp.train(spec, mlp.init_params(spec, 0), np.ones((3, 2)), np.ones(2), TrainConfig())


def test_train_divergence():
    spec = NetSpec(2, 4, 2)
    params = mlp.init_params(spec, 0)
    with pytest.raises(DivergenceError, match="network training diverged"):
        mlp.train(spec, params, np.ones((3, 2)), np.full(3, 10.0), TrainConfig(eta=1e9, steps=20))


def _steep_problem() -> tuple[NetSpec, mlp.NetParams, np.ndarray, np.ndarray]:
    spec = NetSpec(2, 16, 3)
    x = np.random.default_rng(4).normal(size=(6, 3))
    return spec, mlp.init_params(spec, 0), x, np.full(6, 10.0)


def test_train_halves_step_size():
    LOG.reset()
    spec, params, x, y = _steep_problem()

    result = mlp.train(spec, params, x, y, TrainConfig(eta=1e4, steps=20, max_backoffs=60))
    assert len(result.losses) == 21
    assert result.losses[-1] < result.losses[0]
    assert all(after <= before * (1.0 + 1e-12) for before, after in zip(result.losses, result.losses[1:]))
    assert LOG.count("step_size_halved") == 1
    LOG.reset()


def test_train_halvings_exhausted():
    spec, params, x, y = _steep_problem()
    with pytest.raises(DivergenceError, match="diverged"):
        mlp.train(spec, params, x, y, TrainConfig(eta=1e9, steps=20, max_backoffs=2))


def test_serialized_params_are_exact():
    spec = NetSpec(3, 4, 3, antisymmetric_head=True)
    params = mlp.init_params(spec, 8)
    trained = params.with_flat(spec, params.flat() + 0.125)

    loaded_spec, loaded, seed = mlp.loads_params(mlp.dumps_params(spec, trained, seed=8))
    assert loaded_spec == spec
    assert seed == 8
    np.testing.assert_array_equal(loaded.flat(), trained.flat())
    np.testing.assert_array_equal(loaded.theta0, params.theta0)


@pytest.mark.parametrize(
    ("raw", "match"),
    [
        pytest.param('format = "other"\n', "not a mufasa network file", id="format"),
        pytest.param('format = "mufasa-net"\nflatten_order = "first-to-last"\n', "unsupported flatten order", id="order"),
        pytest.param(
            'format = "mufasa-net"\nflatten_order = "last-to-first/row-major/v1"\ntheta = [1.0]\n',
            "malformed network file",
            id="missing-spec",
        ),
    ],
)
def test_loads_params_rejects(raw: str, match: str):
    with pytest.raises(ParseError, match=match):
        mlp.loads_params(raw, "net.toml")


def test_forward_by_hand():
    spec = NetSpec(2, 2, 1)
    params = mlp.NetParams((np.array([[1.0], [1.0]]), np.array([[1.0, 1.0]])), np.zeros(4))
    assert mlp.forward(spec, params, [1.0])[0] == pytest.approx(2.0 * np.sqrt(2.0))
    assert mlp.forward(spec, params, [-1.0])[0] == 0.0


def test_forward_homogeneity():
    spec = NetSpec(2, 8, 3)
    params = mlp.init_params(spec, 0)
    x = np.array([0.3, -0.2, 0.5])
    out = mlp.forward(spec, params, x)[0]

    assert mlp.forward(spec, params, np.zeros(3))[0] == 0.0
    assert mlp.forward(spec, params, 3.0 * x)[0] == pytest.approx(3.0 * out, rel=1e-12)
    scaled = params.with_flat(spec, 2.0 * params.flat())
    assert mlp.forward(spec, scaled, x)[0] == pytest.approx(4.0 * out, rel=1e-9)


def test_grad_params_special_cases():
    spec = NetSpec(3, 4, 3)
    params = mlp.init_params(spec, 1)
    assert not np.any(mlp.grad_params(spec, params, np.zeros(3)))

    linear = NetSpec(1, 4, 3)
    x = np.array([0.5, -1.0, 2.0])
    np.testing.assert_allclose(mlp.grad_params(linear, mlp.init_params(linear, 0), x), 2.0 * x)


def test_train_linear_ridge_solution():
    spec = NetSpec(1, 2, 1)
    params = mlp.init_params(spec, 3)
    w0 = params.theta0[0]

    result = mlp.train(spec, params, [[1.0]], [1.0], TrainConfig(eta=0.01, steps=2000, lambda_reg=1.0))
    # stationary point of (√2·w − 1)²/2 + (w − w0)²/2
    assert result.params.flat()[0] == pytest.approx((np.sqrt(2.0) + w0) / 3.0, abs=1e-4)
