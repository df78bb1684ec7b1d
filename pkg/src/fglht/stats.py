"""Pointwise sums of squares and the four global test statistics.

All statistics are built from two curves on the grid: the hypothesis sum
of squares ``SSH(t)`` and the error sum of squares ``SSE(t)``.

* ``T_L2``:   integral of SSH
* ``F_RATIO``: (integral SSH / q) / (integral SSE / (n - k))
* ``G_GLOBAL``: integral of the pointwise F ratio SSH / gamma(t, t), over q
* ``F_MAX``:   maximum of the pointwise F ratio over the grid, over q

The last two are unchanged when the curves are multiplied by a nonvanishing
function of ``t``; the first two are not.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DegenerateVarianceError, EstimabilityError, InputError, RankError
from .model import (
    DesignMatrix,
    FunctionalDataset,
    Hypothesis,
    TimeGrid,
    check_estimable,
    estimate_beta,
    estimate_covariance,
    variance_diagonal,
)

__all__ = [
    "StatisticKind",
    "PointwiseDecomposition",
    "ScaleFunction",
    "ContrastOperator",
    "prepare_contrast",
    "decompose",
    "trapezoid_weights",
    "integrate_grid",
    "statistic",
    "all_statistics",
    "batch_statistics",
    "scale_dataset",
    "scale_hypothesis",
    "reciprocal_shift_scale",
]

CONDITION_WARNING = 1e12
MIN_SCALE = 1e-12
# Relative size of an error sum of squares that is pure rounding noise.
ROUNDING_SSE = 1e-20


class StatisticKind(enum.Enum):
    T_L2 = "t"
    F_RATIO = "f"
    G_GLOBAL = "g"
    F_MAX = "fmax"

    @property
    def scale_invariant(self) -> bool:
        return self in (StatisticKind.G_GLOBAL, StatisticKind.F_MAX)


@dataclass(frozen=True)
class PointwiseDecomposition:
    grid: TimeGrid
    ssh: np.ndarray
    sse: np.ndarray
    gamma_diag: np.ndarray
    q: int
    dof: int


@dataclass(frozen=True)
class ScaleFunction:
    """Nonvanishing multiplier ``h(t)`` evaluated on the grid."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or not np.all(np.isfinite(vals)):
            raise InputError("scale function must be a finite 1-D array")
        if np.any(np.abs(vals) < MIN_SCALE):
            j = int(np.argmin(np.abs(vals)))
            raise InputError(f"scale function vanishes at grid index {j}")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def reciprocal(self) -> ScaleFunction:
        return ScaleFunction(1.0 / self.values)


def reciprocal_shift_scale(grid: TimeGrid, shift: float = 1.0 / 43) -> ScaleFunction:
    """``h(t) = 1 / (t + shift)``, the default scaling used in the studies."""
    return ScaleFunction(1.0 / (grid.points + shift))


@dataclass(frozen=True)
class ContrastOperator:
    """Hypothesis pre-processed against a design.

    ``SSH(t) = |estimator @ y(t) - whitened_null(t)|^2`` where
    ``estimator = L^{-1} C (X'X)^+ X'`` and ``L L' = C (X'X)^+ C'``.
    """

    estimator: np.ndarray
    whitener: np.ndarray
    q: int


def prepare_contrast(h: Hypothesis, d: DesignMatrix) -> ContrastOperator:
    """Check testability and factorize the middle matrix once."""
    if not check_estimable(h, d):
        raise EstimabilityError("C beta(t) is not estimable for this design")
    if h.q > d.rank_k:
        raise RankError(f"q = {h.q} exceeds the design rank {d.rank_k}")
    c = h.c_matrix
    middle = c @ d.xtx_pinv @ c.T
    middle = 0.5 * (middle + middle.T)
    try:
        chol = scipy.linalg.cholesky(middle, lower=True)
    except np.linalg.LinAlgError as exc:
        raise RankError("C (X'X)^+ C' is singular") from exc
    cond = np.linalg.cond(middle)
    if cond > CONDITION_WARNING:
        warnings.warn(f"C (X'X)^+ C' is ill-conditioned (cond = {cond:.2e})", stacklevel=2)
    whitener = scipy.linalg.solve_triangular(chol, np.eye(h.q), lower=True)
    estimator = whitener @ c @ d.xtx_pinv @ d.x.T
    return ContrastOperator(estimator=estimator, whitener=whitener, q=h.q)


def decompose(
    y: FunctionalDataset,
    d: DesignMatrix,
    h: Hypothesis,
    op: ContrastOperator | None = None,
) -> PointwiseDecomposition:
    """Pointwise SSH, SSE and variance estimate for ``H0: C beta(t) = c(t)``."""
    if op is None:
        op = prepare_contrast(h, d)
    beta = estimate_beta(y, d).beta_hat
    gamma = estimate_covariance(y, d)
    diff = h.c_matrix @ beta - h.null_values(len(y.grid))
    white = op.whitener @ diff
    ssh = np.sum(white * white, axis=0)
    gamma_diag = variance_diagonal(gamma)
    # A column fitted exactly by the design leaves only rounding noise of
    # order eps * |y(t)| in its residuals; count that as zero variance.
    col_sq = np.sum(y.values * y.values, axis=0)
    gamma_diag = np.where(gamma_diag * d.dof <= ROUNDING_SSE * col_sq, 0.0, gamma_diag)
    return PointwiseDecomposition(
        grid=y.grid,
        ssh=ssh,
        sse=d.dof * gamma_diag,
        gamma_diag=gamma_diag,
        q=h.q,
        dof=d.dof,
    )


def trapezoid_weights(grid: TimeGrid | np.ndarray) -> np.ndarray:
    """Weights ``w`` such that ``values @ w`` is the trapezoidal integral."""
    t = grid.points if isinstance(grid, TimeGrid) else np.asarray(grid, dtype=float)
    dt = np.diff(t)
    w = np.zeros_like(t)
    w[:-1] += dt / 2
    w[1:] += dt / 2
    return w


def integrate_grid(values, grid: TimeGrid) -> float:
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != len(grid):
        raise InputError("values and grid lengths differ")
    return float(values @ trapezoid_weights(grid))


def _ratio(ssh: np.ndarray, gamma_diag: np.ndarray) -> np.ndarray:
    if np.any(gamma_diag <= 0):
        j = int(np.argmin(gamma_diag))
        raise DegenerateVarianceError(f"zero variance estimate at grid index {j}")
    return ssh / gamma_diag


def statistic(dec: PointwiseDecomposition, kind: StatisticKind) -> float:
    w = trapezoid_weights(dec.grid)
    if kind is StatisticKind.T_L2:
        return float(dec.ssh @ w)
    if kind is StatisticKind.F_RATIO:
        return float((dec.ssh @ w / dec.q) / (dec.sse @ w / dec.dof))
    ratio = _ratio(dec.ssh, dec.gamma_diag)
    if kind is StatisticKind.G_GLOBAL:
        return float(ratio @ w / dec.q)
    if kind is StatisticKind.F_MAX:
        return float(np.max(ratio) / dec.q)
    raise InputError(f"unknown statistic kind {kind!r}")


def all_statistics(dec: PointwiseDecomposition) -> dict[StatisticKind, float]:
    return {kind: statistic(dec, kind) for kind in StatisticKind}


def batch_statistics(
    ssh: np.ndarray, sse: np.ndarray, weights: np.ndarray, q: int, dof: int
) -> dict[StatisticKind, np.ndarray]:
    """All four statistics for a stack of ``(B, T)`` SSH/SSE curves.

    The caller guarantees ``sse > 0`` everywhere.
    """
    ratio = ssh / (sse / dof)
    int_ssh = ssh @ weights
    return {
        StatisticKind.T_L2: int_ssh,
        StatisticKind.F_RATIO: (int_ssh / q) / ((sse @ weights) / dof),
        StatisticKind.G_GLOBAL: (ratio @ weights) / q,
        StatisticKind.F_MAX: np.max(ratio, axis=-1) / q,
    }


def scale_dataset(y: FunctionalDataset, h: ScaleFunction) -> FunctionalDataset:
    """Multiply every curve pointwise by ``h(t)``."""
    if h.values.size != len(y.grid):
        raise InputError("scale function and grid lengths differ")
    return FunctionalDataset(y.grid, y.values * h.values)


def scale_hypothesis(hyp: Hypothesis, h: ScaleFunction) -> Hypothesis:
    """Null values become ``h(t) c(t)``; ``C`` is unchanged."""
    if hyp.c_funcs is None:
        return hyp
    if hyp.c_funcs.shape[1] != h.values.size:
        raise InputError("scale function and c_funcs lengths differ")
    return Hypothesis(hyp.c_matrix, hyp.c_funcs * h.values)
