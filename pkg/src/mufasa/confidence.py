"""
Design matrices and upper confidence bounds.

Every gradient stream (one per bandit network plus one for the shared
network) owns a `DesignState` tracking two regularized Gram matrices:

    A  = λI + Σ g(x; θ_i) g(x; θ_i)ᵀ / m    (gradients at the current parameters)
    A′ = λI + Σ g(x; θ_0) g(x; θ_0)ᵀ / m    (gradients at initialization)

Their inverses are maintained with rank-1 updates and re-synchronized from
the Gram matrices every `RESYNC_EVERY` updates.
"""

from dataclasses import dataclass, replace
from typing import Literal, Sequence, TypeAlias

import numpy as np
import numpy.typing as npt

from .errors import ConfigError, ContractViolation
from .log import LOG
from .tensor import RESYNC_EVERY, Matrix, Vector, as_matrix, as_vector, direct_inverse, quad_norm, quad_norm_rows
from .tensor import sherman_morrison_update

UcbMode: TypeAlias = Literal["empirical", "theoretical"]
Schedule: TypeAlias = Literal["inv_sqrt", "inv_log", "constant", "inv_sqrt_pulls", "inv_log_pulls"]

UCB_MODES: tuple[UcbMode, ...] = ("empirical", "theoretical")
SCHEDULES: tuple[Schedule, ...] = ("inv_sqrt", "inv_log", "constant", "inv_sqrt_pulls", "inv_log_pulls")


@dataclass(frozen=True)
class DesignState:
    a_inv: Matrix
    a0_inv: Matrix
    gram: Matrix
    gram0: Matrix
    lam: float
    m_width: float
    update_count: int
    logdet_a0: float

    @staticmethod
    def fresh(dim: int, lam: float, m_width: float) -> "DesignState":
        if lam <= 0:
            raise ConfigError(f"ridge λ must be > 0, got {lam}")
        if m_width <= 0:
            raise ConfigError(f"gradient scaling width must be > 0, got {m_width}")

        gram = lam * np.eye(dim)
        inverse = np.eye(dim) / lam
        return DesignState(inverse, inverse, gram, gram, lam, m_width, 0, dim * float(np.log(lam)))

    @property
    def dim(self) -> int:
        return self.a_inv.shape[0]

    def logdet_ratio(self) -> float:
        """log(det A′ / det λI)"""

        return max(self.logdet_a0 - self.dim * float(np.log(self.lam)), 0.0)


def update_design(state: DesignState, g_current: npt.ArrayLike, g_init: npt.ArrayLike) -> DesignState:
    g_current = as_vector(g_current)
    g_init = as_vector(g_init)
    if g_current.shape != (state.dim,) or g_init.shape != (state.dim,):
        raise ContractViolation(
            f"design stream of dimension {state.dim} got gradients {g_current.shape} and {g_init.shape}"
        )

    c = 1.0 / state.m_width
    logdet_step = float(np.log1p(c * float(g_init @ state.a0_inv @ g_init)))
    a_inv = sherman_morrison_update(state.a_inv, g_current, c)
    a0_inv = sherman_morrison_update(state.a0_inv, g_init, c)
    gram = state.gram + c * np.outer(g_current, g_current)
    gram0 = state.gram0 + c * np.outer(g_init, g_init)

    count = state.update_count + 1
    if count % RESYNC_EVERY == 0:
        LOG.debug(f"re-synchronizing design inverses after {count} updates")
        a_inv = direct_inverse(gram)
        a0_inv = direct_inverse(gram0)

    return DesignState(a_inv, a0_inv, gram, gram0, state.lam, state.m_width, count, state.logdet_a0 + logdet_step)


def rebuild_current(state: DesignState, gradients: npt.ArrayLike) -> DesignState:
    """
    Replace A by λI + Σ g gᵀ/m over `gradients` (one row per past round,
    evaluated at the current parameters). A′ is left untouched.
    """

    rows = as_matrix(gradients).reshape(-1, state.dim)
    gram = state.lam * np.eye(state.dim) + rows.T @ rows / state.m_width
    return replace(state, a_inv=direct_inverse(gram), gram=gram)


@dataclass(frozen=True)
class UcbConfig:
    # pylint: disable=too-many-instance-attributes

    mode: UcbMode = "empirical"
    delta: float = 0.1
    norm_bound: float = 1.0
    """S, the bound on the norm of the reward parameters"""
    c_bar: float = 1.0
    exploration: float = 1.0
    """ν, the weight of every bonus"""
    schedule: Schedule = "inv_sqrt"
    schedule_constant: float = 0.5
    c_l: float = 1.0
    c_1: float = 1.0
    c_2: float = 1.0
    eta: float = 0.01
    steps: int = 100
    ridge: float = 1.0

    def __post_init__(self):
        if self.mode not in UCB_MODES:
            raise ConfigError(f"unknown UCB mode {self.mode!r}")
        if self.schedule not in SCHEDULES:
            raise ConfigError(f"unknown λ schedule {self.schedule!r}")
        if not 0.0 < self.delta < 1.0:
            raise ConfigError(f"delta must lie in (0, 1), got {self.delta}")
        if not 0.0 <= self.schedule_constant <= 1.0:
            raise ConfigError(f"constant schedule value must lie in [0, 1], got {self.schedule_constant}")
        if self.c_bar <= 0:
            raise ConfigError(f"c_bar must be > 0, got {self.c_bar}")
        if self.exploration < 0:
            raise ConfigError(f"exploration weight must be >= 0, got {self.exploration}")

    @property
    def uses_pulls(self) -> bool:
        return self.schedule.endswith("_pulls")

    def weight(self, count: int) -> float:
        """
        Weight of the initialization-gradient term. `count` is the round
        index for round-based schedules and the pull count of the arm for
        the `*_pulls` schedules. Values are capped at 1.
        """

        if self.schedule == "constant":
            return self.schedule_constant
        if self.schedule in ("inv_sqrt", "inv_sqrt_pulls"):
            return 1.0 / float(np.sqrt(count + 1))
        return min(1.0, 1.0 / float(np.log(count + 2)))

    def weights(self, counts: npt.ArrayLike) -> Vector:
        return np.array([self.weight(int(c)) for c in np.asarray(counts).reshape(-1)])


@dataclass(frozen=True)
class UcbBreakdown:
    per_bandit: tuple[float, ...]
    shared: float
    total: float


def empirical_bonus(state: DesignState, g_t: npt.ArrayLike, g_0: npt.ArrayLike, weight: float) -> float:
    """(1 − w)·‖g_t/√m‖_{A⁻¹} + w·‖g_0/√m‖_{A′⁻¹}"""

    scale = 1.0 / np.sqrt(state.m_width)
    current = quad_norm(state.a_inv, scale * as_vector(g_t))
    initial = quad_norm(state.a0_inv, scale * as_vector(g_0))
    return (1.0 - weight) * current + weight * initial


def empirical_bonus_rows(
    state: DesignState,
    g_rows: Matrix,
    g0_rows: Matrix,
    weights: float | Vector,
) -> Vector:
    scale = 1.0 / np.sqrt(state.m_width)
    current = quad_norm_rows(state.a_inv, scale * g_rows)
    initial = quad_norm_rows(state.a0_inv, scale * g0_rows)
    return (1.0 - weights) * current + weights * initial


def gamma_terms(
    cfg: UcbConfig,
    t: int,
    logdet_ratio: float,
    *,
    depth: int,
    width: int,
    delta: float | None = None,
) -> tuple[float, float, float, float]:
    """
    The coefficients γ₁ … γ₄ of the theoretical bonus for a network of the
    given depth and width after `t` rounds. `delta` defaults to `cfg.delta`;
    callers combining K + 1 bounds pass δ/(K + 1).
    """

    if width <= 1:
        raise ConfigError(f"theoretical bonus needs width > 1, got {width}")
    if logdet_ratio < 0:
        raise ContractViolation(f"log-det ratio must be >= 0, got {logdet_ratio}")

    lam = cfg.ridge
    delta = cfg.delta if delta is None else delta
    if not 0.0 < delta <= 1.0:
        raise ContractViolation(f"delta must lie in (0, 1], got {delta}")

    factor = 1.0 - cfg.eta * width * lam
    if factor < 0.0:
        LOG.warn("clamped_geometric_factor", f"1 - ηmλ = {factor:.3g} is negative, clamped to 0")
        factor = 0.0

    geometric = factor ** (cfg.steps / 2.0)
    gamma_1 = (lam + t * cfg.c_l * depth) * (geometric * np.sqrt(t / lam)) + 1.0
    gamma_2 = np.sqrt(max(logdet_ratio - 2.0 * np.log(delta), 0.0)) + np.sqrt(lam) * cfg.norm_bound

    width_term = width ** (-1.0 / 6.0) * np.sqrt(np.log(width))
    gamma_3 = cfg.c_2 * width_term * t ** (1.0 / 6.0) * lam ** (-7.0 / 6.0) * depth**3.5
    gamma_4 = cfg.c_1 * width_term * t ** (2.0 / 3.0) * lam ** (-2.0 / 3.0) * depth**3

    return float(gamma_1), float(gamma_2), float(gamma_3), float(gamma_4)


def theoretical_bonus(
    state: DesignState,
    g_t: npt.ArrayLike,
    g_0: npt.ArrayLike,
    gammas: tuple[float, float, float, float],
) -> float:
    gamma_1, gamma_2, gamma_3, gamma_4 = gammas
    scale = 1.0 / np.sqrt(state.m_width)
    current = quad_norm(state.a_inv, scale * as_vector(g_t))
    initial = quad_norm(state.a0_inv, scale * as_vector(g_0))
    return gamma_1 * current + gamma_2 * initial + gamma_1 * gamma_3 + gamma_4


def theoretical_bonus_rows(
    state: DesignState,
    g_rows: Matrix,
    g0_rows: Matrix,
    gammas: tuple[float, float, float, float],
) -> Vector:
    gamma_1, gamma_2, gamma_3, gamma_4 = gammas
    scale = 1.0 / np.sqrt(state.m_width)
    current = quad_norm_rows(state.a_inv, scale * g_rows)
    initial = quad_norm_rows(state.a0_inv, scale * g0_rows)
    return gamma_1 * current + gamma_2 * initial + gamma_1 * gamma_3 + gamma_4


def bonus_rows(
    cfg: UcbConfig,
    state: DesignState,
    g_rows: Matrix,
    g0_rows: Matrix,
    *,
    t: int,
    depth: int,
    width: int,
    delta: float,
    counts: npt.ArrayLike | None = None,
) -> Vector:
    """
    Bonus of every candidate row in the configured mode, scaled by the
    exploration weight. `counts` holds the per-row pull counts used by the
    `*_pulls` schedules.
    """

    if cfg.mode == "theoretical":
        gammas = gamma_terms(cfg, t, state.logdet_ratio(), depth=depth, width=width, delta=delta)
        return cfg.exploration * theoretical_bonus_rows(state, g_rows, g0_rows, gammas)

    if cfg.uses_pulls and counts is not None:
        weights: float | Vector = cfg.weights(counts)
    else:
        weights = cfg.weight(t)
    return cfg.exploration * empirical_bonus_rows(state, g_rows, g0_rows, weights)


def ucb_total(per_bandit: Sequence[float], shared: float, c_bar: float) -> UcbBreakdown:
    if any(bonus < 0 for bonus in per_bandit) or shared < 0:
        raise ContractViolation(f"confidence bonuses must be >= 0, got {list(per_bandit)} and {shared}")
    terms = tuple(float(bonus) for bonus in per_bandit)
    return UcbBreakdown(terms, float(shared), c_bar * sum(terms) + float(shared))
