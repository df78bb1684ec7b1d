"""Functional response model with a possibly rank-deficient design.

The model is ``y_i(t) = x_i' beta(t) + v_i(t)`` observed on a common grid.
Estimation uses the Moore-Penrose inverse of ``X'X``; only estimable
functions ``C beta(t)`` are ever reported, so the choice of generalized
inverse does not matter for anything downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateVarianceError,
    DegreesOfFreedomError,
    InputError,
)

__all__ = [
    "TimeGrid",
    "FunctionalDataset",
    "DesignMatrix",
    "CoefficientEstimate",
    "CovarianceEstimate",
    "Hypothesis",
    "moore_penrose_pinv",
    "build_design",
    "estimate_beta",
    "estimate_covariance",
    "check_estimable",
    "variance_diagonal",
]

# Negative diagonal entries of the covariance estimate above this value are
# rounding noise and are clamped to zero; anything lower is a bug.
DIAGONAL_FLOOR = -1e-10


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def _finite_matrix(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2 or arr.size == 0:
        raise InputError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class TimeGrid:
    """Ordered evaluation points ``t_1 < ... < t_T`` inside ``[a, b]``.

    ``a`` and ``b`` default to the first and last grid point.
    """

    points: np.ndarray
    a: float | None = None
    b: float | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise InputError("a time grid needs at least two points")
        if not np.all(np.isfinite(pts)):
            raise InputError("time grid contains non-finite points")
        if np.any(np.diff(pts) <= 0):
            raise InputError("time grid must be strictly increasing")
        a = float(pts[0]) if self.a is None else float(self.a)
        b = float(pts[-1]) if self.b is None else float(self.b)
        if a > pts[0] or b < pts[-1]:
            raise InputError(f"grid points fall outside [{a}, {b}]")
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @classmethod
    def uniform(cls, size: int, a: float = 0.0, b: float = 1.0) -> TimeGrid:
        """``size`` equispaced points from ``a`` to ``b`` inclusive."""
        return cls(np.linspace(a, b, size), a, b)

    def __len__(self) -> int:
        return self.points.size

    def __eq__(self, other):
        if not isinstance(other, TimeGrid):
            return NotImplemented
        return (
            self.a == other.a
            and self.b == other.b
            and np.array_equal(self.points, other.points)
        )

    __hash__ = None


@dataclass(frozen=True)
class FunctionalDataset:
    """``n`` curves evaluated on a shared grid; row ``i`` is ``y_i``."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        vals = _finite_matrix(self.values, "curve values")
        if vals.shape[1] != len(self.grid):
            raise InputError(
                f"curves have {vals.shape[1]} columns but the grid has {len(self.grid)} points"
            )
        object.__setattr__(self, "values", _frozen(vals))

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class DesignMatrix:
    """Design ``X`` with the pseudoinverse machinery computed once.

    Use :func:`build_design` rather than the constructor.

    Attributes
    ----------
    x : ndarray, shape (n, p + 1)
    rank_k : int
        Numerical rank of ``x``.
    xtx_pinv : ndarray, shape (p + 1, p + 1)
        Moore-Penrose inverse of ``x.T @ x``.
    residual_projector : ndarray, shape (n, n)
        ``I - x (x'x)^+ x'``.
    hat_basis : ndarray, shape (n, rank_k)
        Orthonormal basis of the column space of ``x``; the hat matrix is
        ``hat_basis @ hat_basis.T``.
    """

    x: np.ndarray
    rank_k: int
    xtx_pinv: np.ndarray
    residual_projector: np.ndarray
    hat_basis: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def n_params(self) -> int:
        return self.x.shape[1]

    @property
    def dof(self) -> int:
        """Residual degrees of freedom ``n - k``."""
        return self.n - self.rank_k

    @property
    def xtx(self) -> np.ndarray:
        return self.x.T @ self.x


@dataclass(frozen=True)
class CoefficientEstimate:
    grid: TimeGrid
    beta_hat: np.ndarray

    def __post_init__(self):
        beta = _finite_matrix(self.beta_hat, "coefficient estimate")
        if beta.shape[1] != len(self.grid):
            raise InputError("coefficient estimate does not match the grid length")
        object.__setattr__(self, "beta_hat", _frozen(beta))

    def scaled(self, factor: float) -> CoefficientEstimate:
        return CoefficientEstimate(self.grid, factor * self.beta_hat)


@dataclass(frozen=True)
class CovarianceEstimate:
    """Gridded covariance function ``gamma(s, t)`` with its degrees of freedom."""

    grid: TimeGrid
    gamma_hat: np.ndarray
    dof: int

    def __post_init__(self):
        gamma = _finite_matrix(self.gamma_hat, "covariance estimate")
        t = len(self.grid)
        if gamma.shape != (t, t):
            raise InputError(f"covariance must be {t}x{t}, got {gamma.shape}")
        object.__setattr__(self, "gamma_hat", _frozen(gamma))


@dataclass(frozen=True)
class Hypothesis:
    """Linear hypothesis ``C beta(t) = c(t)`` for all ``t``.

    Parameters
    ----------
    c_matrix : array_like, shape (q, p + 1)
        Must have full row rank.
    c_funcs : array_like, shape (q, T), optional
        Null values on the grid. ``None`` means identically zero.
    """

    c_matrix: np.ndarray
    c_funcs: np.ndarray | None = None

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.c_matrix, dtype=float))
        c = _finite_matrix(c, "contrast matrix")
        if np.linalg.matrix_rank(c) != c.shape[0]:
            raise InputError("contrast matrix must have full row rank")
        object.__setattr__(self, "c_matrix", _frozen(c))
        if self.c_funcs is not None:
            cf = np.atleast_2d(np.asarray(self.c_funcs, dtype=float))
            cf = _finite_matrix(cf, "null value functions")
            if cf.shape[0] != c.shape[0]:
                raise InputError("c_funcs must have one row per contrast")
            object.__setattr__(self, "c_funcs", _frozen(cf))

    @property
    def q(self) -> int:
        return self.c_matrix.shape[0]

    def null_values(self, n_points: int) -> np.ndarray:
        """``c(t)`` on a grid of ``n_points`` as a ``(q, n_points)`` array."""
        if self.c_funcs is None:
            return np.zeros((self.q, n_points))
        if self.c_funcs.shape[1] != n_points:
            raise InputError(
                f"c_funcs has {self.c_funcs.shape[1]} columns, grid has {n_points}"
            )
        return self.c_funcs


def moore_penrose_pinv(a, rtol: float | None = None) -> np.ndarray:
    """Moore-Penrose inverse through the singular value decomposition.

    Singular values below ``rtol * sigma_max`` are treated as zero. The
    default ``rtol`` is ``max(a.shape) * eps``.
    """
    a = _finite_matrix(a, "matrix")
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    if rtol is None:
        rtol = max(a.shape) * np.finfo(float).eps
    cutoff = rtol * (s[0] if s.size else 0.0)
    keep = s > cutoff
    inv_s = np.zeros_like(s)
    inv_s[keep] = 1.0 / s[keep]
    return (vt.T * inv_s) @ u.T


def build_design(x) -> DesignMatrix:
    """Compute rank, ``(X'X)^+`` and the residual projector for ``x``."""
    x = _finite_matrix(x, "design matrix")
    n, m = x.shape
    u, s, _ = np.linalg.svd(x, full_matrices=False)
    tol = max(n, m) * np.finfo(float).eps * s[0]
    rank_k = int(np.sum(s > tol))
    basis = u[:, :rank_k]
    xtx_pinv = moore_penrose_pinv(x.T @ x)
    xtx_pinv = 0.5 * (xtx_pinv + xtx_pinv.T)
    # The projector is built from the SVD basis so that it is exactly
    # symmetric and idempotent to rounding, whatever the conditioning of X'X.
    residual = np.eye(n) - basis @ basis.T
    residual = 0.5 * (residual + residual.T)
    return DesignMatrix(
        x=_frozen(x),
        rank_k=rank_k,
        xtx_pinv=_frozen(xtx_pinv),
        residual_projector=_frozen(residual),
        hat_basis=_frozen(basis),
    )


def _check_rows(y: FunctionalDataset, d: DesignMatrix):
    if y.n != d.n:
        raise InputError(f"dataset has {y.n} curves but the design has {d.n} rows")


def estimate_beta(y: FunctionalDataset, d: DesignMatrix) -> CoefficientEstimate:
    """``beta_hat(t) = (X'X)^+ X' y(t)`` at every grid point."""
    _check_rows(y, d)
    beta = d.xtx_pinv @ (d.x.T @ y.values)
    return CoefficientEstimate(y.grid, beta)


def estimate_covariance(y: FunctionalDataset, d: DesignMatrix) -> CovarianceEstimate:
    """Unbiased residual covariance ``Y' (I - H) Y / (n - k)``."""
    _check_rows(y, d)
    if d.dof <= 0:
        raise DegreesOfFreedomError(f"n - k = {d.dof}; need more curves than the design rank")
    resid = d.residual_projector @ y.values
    gamma = resid.T @ resid / d.dof
    gamma = 0.5 * (gamma + gamma.T)
    return CovarianceEstimate(y.grid, gamma, d.dof)


def variance_diagonal(gamma: CovarianceEstimate | np.ndarray) -> np.ndarray:
    """Diagonal ``gamma(t, t)`` with rounding-level negatives clamped to 0."""
    g = gamma.gamma_hat if isinstance(gamma, CovarianceEstimate) else np.asarray(gamma)
    diag = np.array(np.diagonal(g), dtype=float)
    if np.any(diag <= DIAGONAL_FLOOR):
        j = int(np.argmin(diag))
        raise DegenerateVarianceError(
            f"negative variance estimate {diag[j]:.3e} at grid index {j}"
        )
    return np.maximum(diag, 0.0)


def check_estimable(h: Hypothesis, d: DesignMatrix, tol: float = 1e-8) -> bool:
    """True when every row of ``C`` lies in the row space of ``X``.

    Tested as ``C (X'X)^+ (X'X) = C`` in the max-abs norm, relative to
    the largest entry of ``C``.
    """
    c = h.c_matrix
    if c.shape[1] != d.n_params:
        raise InputError(
            f"contrast matrix has {c.shape[1]} columns, design has {d.n_params}"
        )
    gap = c @ d.xtx_pinv @ d.xtx - c
    return bool(np.max(np.abs(gap)) <= tol * max(1.0, np.max(np.abs(c))))
