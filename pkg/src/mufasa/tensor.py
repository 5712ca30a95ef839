"""
Dense float64 linear algebra used by every other module.

Vectors and matrices are plain `numpy` arrays. All functions are pure: they
never modify their arguments, and results are fresh arrays.
"""

from typing import TypeAlias

import numpy as np
import numpy.typing as npt
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import ContractViolation, NearSingularUpdate, NotSpdError
from .log import LOG

Vector: TypeAlias = npt.NDArray[np.float64]
Matrix: TypeAlias = npt.NDArray[np.float64]

SM_DENOMINATOR_MIN = 1e-12
RESYNC_EVERY = 500


def as_vector(values: npt.ArrayLike) -> Vector:
    vec = np.asarray(values, dtype=np.float64)
    if vec.ndim != 1:
        raise ContractViolation(f"expected a vector, got an array of shape {vec.shape}")
    return vec


def as_matrix(values: npt.ArrayLike) -> Matrix:
    mat = np.asarray(values, dtype=np.float64)
    if mat.ndim != 2:
        raise ContractViolation(f"expected a matrix, got an array of shape {mat.shape}")
    return mat


def _check_finite(arr: npt.NDArray[np.float64], what: str):
    if not np.all(np.isfinite(arr)):
        raise ArithmeticError(f"{what} produced non-finite entries")


def matvec(m: Matrix, v: Vector) -> Vector:
    m = as_matrix(m)
    v = as_vector(v)
    if m.shape[1] != v.shape[0]:
        raise ContractViolation(f"matvec: matrix has {m.shape[1]} columns but vector has {v.shape[0]} entries")
    return m @ v


def sherman_morrison_update(a_inv: Matrix, u: Vector, c: float) -> Matrix:
    """
    Given `a_inv` = A⁻¹, return (A + c·u uᵀ)⁻¹ without refactorising A.
    """

    a_inv = as_matrix(a_inv)
    u = as_vector(u)
    if a_inv.shape != (u.shape[0], u.shape[0]):
        raise ContractViolation(f"sherman_morrison_update: inverse {a_inv.shape} does not match vector {u.shape}")
    if c <= 0:
        raise ContractViolation(f"sherman_morrison_update: scale must be positive, got {c}")

    a_inv_u = a_inv @ u
    denominator = 1.0 + c * float(u @ a_inv_u)
    if denominator <= SM_DENOMINATOR_MIN:
        raise NearSingularUpdate(f"rank-1 update denominator {denominator:.3g} is below {SM_DENOMINATOR_MIN}")

    updated = a_inv - (c / denominator) * np.outer(a_inv_u, a_inv_u)
    _check_finite(updated, "sherman_morrison_update")
    return updated


def _cholesky(m: Matrix, what: str) -> tuple[Matrix, bool]:
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise ContractViolation(f"{what}: matrix must be square, got {m.shape}")
    try:
        return cho_factor(m, lower=True, check_finite=True)
    except (LinAlgError, ValueError) as exc:
        raise NotSpdError(f"{what}: matrix is not symmetric positive definite ({exc})") from exc


def direct_inverse(m: Matrix) -> Matrix:
    factor = _cholesky(m, "direct_inverse")
    inverse = cho_solve(factor, np.eye(m.shape[0]))
    # cho_solve is only symmetric up to rounding
    return (inverse + inverse.T) / 2.0


def quad_norm(a_inv: Matrix, g: Vector) -> float:
    """Mahalanobis norm √(gᵀ A⁻¹ g)."""

    a_inv = as_matrix(a_inv)
    g = as_vector(g)
    if a_inv.shape != (g.shape[0], g.shape[0]):
        raise ContractViolation(f"quad_norm: inverse {a_inv.shape} does not match vector {g.shape}")

    value = float(g @ a_inv @ g)
    if value < 0.0:
        LOG.warn("negative_quad_form", f"quadratic form {value:.3g} clamped to 0")
        return 0.0
    return float(np.sqrt(value))


def quad_norm_rows(a_inv: Matrix, rows: Matrix) -> Vector:
    """`quad_norm` of every row of `rows`, evaluated in one pass."""

    a_inv = as_matrix(a_inv)
    rows = as_matrix(rows)
    if a_inv.shape != (rows.shape[1], rows.shape[1]):
        raise ContractViolation(f"quad_norm_rows: inverse {a_inv.shape} does not match rows {rows.shape}")

    values = np.einsum("ij,ij->i", rows @ a_inv, rows)
    negative = values < 0.0
    if np.any(negative):
        for value in values[negative]:
            LOG.warn("negative_quad_form", f"quadratic form {value:.3g} clamped to 0")
        values = np.where(negative, 0.0, values)
    return np.sqrt(values)


def log_det(m: Matrix) -> float:
    factor, _ = _cholesky(m, "log_det")
    return float(2.0 * np.sum(np.log(np.diag(factor))))
