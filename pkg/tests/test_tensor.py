import numpy as np
import pytest

from mufasa.errors import ContractViolation, NearSingularUpdate, NotSpdError
from mufasa.log import LOG
from mufasa.tensor import direct_inverse, log_det, matvec, quad_norm, quad_norm_rows, sherman_morrison_update


@pytest.mark.parametrize(
    ("m", "v", "expected"),
    [
        pytest.param(np.eye(2), [3.0, 4.0], [3.0, 4.0], id="identity"),
        pytest.param([[1.0, 2.0], [3.0, 4.0]], [1.0, 1.0], [3.0, 7.0], id="hand"),
        pytest.param(np.zeros((3, 2)), [5.0, -1.0], [0.0, 0.0, 0.0], id="zero"),
    ],
)
def test_matvec(m: np.ndarray, v: list[float], expected: list[float]):
    np.testing.assert_array_equal(matvec(np.asarray(m), np.asarray(v)), expected)


def test_matvec_mismatch():
    with pytest.raises(ContractViolation, match="2 columns but vector has 3"):
        matvec(np.eye(2), np.ones(3))


def test_sherman_morrison_identity():
    updated = sherman_morrison_update(np.eye(2), np.array([1.0, 0.0]), 1.0)
    np.testing.assert_allclose(updated, np.diag([0.5, 1.0]))


def test_sherman_morrison_zero_vector():
    updated = sherman_morrison_update(np.eye(2), np.zeros(2), 1.0)
    np.testing.assert_array_equal(updated, np.eye(2))


@pytest.mark.parametrize(("dim", "updates", "tol"), [(16, 100, 1e-8), (64, 500, 1e-8)])
def test_sherman_morrison_matches_direct(dim: int, updates: int, tol: float):
    rng = np.random.default_rng(7)
    a = np.eye(dim)
    a_inv = np.eye(dim)
    for _ in range(updates):
        u = rng.normal(size=dim) / np.sqrt(dim)
        a = a + 0.5 * np.outer(u, u)
        a_inv = sherman_morrison_update(a_inv, u, 0.5)
    assert np.max(np.abs(a_inv - direct_inverse(a))) <= tol


def test_sherman_morrison_near_singular():
    # A = -I is not SPD, so the denominator 1 + uᵀA⁻¹u vanishes for a unit u
    with pytest.raises(NearSingularUpdate):
        sherman_morrison_update(-np.eye(2), np.array([1.0, 0.0]), 1.0)


def test_sherman_morrison_rejects_nonpositive_scale():
    with pytest.raises(ContractViolation):
        sherman_morrison_update(np.eye(2), np.ones(2), 0.0)


def test_direct_inverse():
    np.testing.assert_allclose(direct_inverse(np.diag([2.0, 4.0])), np.diag([0.5, 0.25]))
    np.testing.assert_allclose(direct_inverse(np.eye(5)), np.eye(5))

    rng = np.random.default_rng(3)
    b = rng.normal(size=(8, 8))
    a = b.T @ b + np.eye(8)
    assert np.max(np.abs(a @ direct_inverse(a) - np.eye(8))) <= 1e-10


def test_direct_inverse_not_spd():
    with pytest.raises(NotSpdError):
        direct_inverse(np.diag([1.0, -1.0]))


def test_quad_norm():
    assert quad_norm(np.array([[0.25]]), np.array([2.0])) == pytest.approx(1.0)
    assert quad_norm(np.eye(3), np.zeros(3)) == 0.0

    g = np.array([3.0, 4.0])
    assert quad_norm(np.eye(2) / 4.0, g) == pytest.approx(np.linalg.norm(g) / 2.0)


def test_quad_norm_negative_is_clamped():
    LOG.reset()
    assert quad_norm(-np.eye(2), np.ones(2)) == 0.0
    assert LOG.count("negative_quad_form") == 1


def test_quad_norm_rows_matches_single():
    rng = np.random.default_rng(11)
    b = rng.normal(size=(6, 6))
    a_inv = direct_inverse(b.T @ b + np.eye(6))
    rows = rng.normal(size=(4, 6))
    np.testing.assert_allclose(quad_norm_rows(a_inv, rows), [quad_norm(a_inv, row) for row in rows], rtol=1e-12)


def test_log_det():
    assert log_det(np.eye(4)) == 0.0
    assert log_det(np.diag([np.e, np.e**2])) == pytest.approx(3.0)

    rng = np.random.default_rng(5)
    b = rng.normal(size=(10, 10))
    a = b.T @ b + np.eye(10)
    _, expected = np.linalg.slogdet(a)
    assert abs(log_det(a) - expected) <= 1e-7


def test_log_det_not_spd():
    with pytest.raises(NotSpdError):
        log_det(np.diag([1.0, 0.0]))
