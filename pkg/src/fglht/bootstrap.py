"""Bootstrap null distributions and p-values.

Two resampling schemes are provided:

nonparametric
    Residual curves ``v_i(t) = y_i(t) - x_i' beta_hat(t)`` are drawn with
    replacement, added back to the fitted curves, and SSH is centred at
    the original estimate ``C beta_hat(t)``.
parametric
    Curves are drawn as zero-mean Gaussian vectors with covariance
    ``gamma_hat`` and SSH is centred at zero.

Every replicate ``m`` owns a counter-based Philox stream keyed by the seed,
so results do not depend on how replicates are scheduled across threads.

The single-replicate functions follow the textbook recipe step by step and
are kept as a reference for the vectorised engine in
:func:`null_distribution`, which computes the same numbers in batches.
"""

from __future__ import annotations

import enum
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateVarianceError, InputError, NumericError
from .model import (
    CoefficientEstimate,
    CovarianceEstimate,
    DesignMatrix,
    FunctionalDataset,
    Hypothesis,
    estimate_beta,
    estimate_covariance,
)
from .stats import (
    ContrastOperator,
    StatisticKind,
    batch_statistics,
    decompose,
    prepare_contrast,
    statistic,
    trapezoid_weights,
)

__all__ = [
    "BootstrapKind",
    "TestResult",
    "replicate_stream",
    "residual_functions",
    "gaussian_factor",
    "nonparametric_null_replicate",
    "parametric_null_replicate",
    "null_distribution",
    "bootstrap_p_value",
    "bootstrap_test",
    "bootstrap_tests",
]

log = logging.getLogger(__name__)

DEFAULT_M = 1000
CHUNK = 250
MAX_REDRAWS = 1000
REDRAW_WARN_RATE = 0.01
# A replicate whose SSE falls below this fraction of its total sum of
# squares at some grid point is treated as degenerate and redrawn.
DEGENERATE_SSE = 1e-12


class BootstrapKind(enum.Enum):
    NONPARAMETRIC = "nb"
    PARAMETRIC = "pb"


_STREAM_TAG = {BootstrapKind.NONPARAMETRIC: 1, BootstrapKind.PARAMETRIC: 2}


@dataclass(frozen=True)
class TestResult:
    kind: StatisticKind
    bootstrap: BootstrapKind
    observed: float
    p_value: float
    m_replicates: int
    seed: int
    replicates: np.ndarray | None = None
    redraws: int = 0

    __test__ = False  # not a pytest class


def _stream_key(seed: int, tag: int) -> np.ndarray:
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=(tag,))
    return ss.generate_state(2, np.uint64)


def replicate_stream(key: np.ndarray, index: int) -> np.random.Generator:
    """Independent generator for replicate ``index`` under ``key``."""
    return np.random.Generator(np.random.Philox(key=key, counter=[0, 0, 0, index]))


def residual_functions(
    y: FunctionalDataset, d: DesignMatrix, beta: CoefficientEstimate | None = None
) -> FunctionalDataset:
    """Estimated subject effects ``y_i(t) - x_i' beta_hat(t)``."""
    if beta is None:
        beta = estimate_beta(y, d)
    if beta.beta_hat.shape[0] != d.n_params or y.n != d.n:
        raise InputError("dataset, design and coefficients disagree in size")
    return FunctionalDataset(y.grid, y.values - d.x @ beta.beta_hat)


def gaussian_factor(gamma: CovarianceEstimate | np.ndarray) -> np.ndarray:
    """Matrix ``F`` with ``F F' = gamma`` after clipping negative eigenvalues."""
    g = gamma.gamma_hat if isinstance(gamma, CovarianceEstimate) else np.asarray(gamma)
    try:
        evals, evecs = np.linalg.eigh(0.5 * (g + g.T))
    except np.linalg.LinAlgError as exc:
        raise NumericError("eigendecomposition of the covariance failed") from exc
    return evecs * np.sqrt(np.clip(evals, 0.0, None))


def _sse_curve(d: DesignMatrix, ystar: np.ndarray) -> np.ndarray:
    return np.einsum("it,it->t", ystar, d.residual_projector @ ystar)


def _degenerate(sse: np.ndarray, total: np.ndarray) -> bool:
    return bool(np.any(sse <= DEGENERATE_SSE * np.maximum(total, np.finfo(float).tiny)))


def _replicate_statistic(
    ssh: np.ndarray, sse: np.ndarray, grid, q: int, dof: int, kind: StatisticKind
) -> float:
    stats = batch_statistics(ssh[None], sse[None], trapezoid_weights(grid), q, dof)
    return float(stats[kind][0])


def nonparametric_null_replicate(
    resid: FunctionalDataset,
    beta: CoefficientEstimate,
    d: DesignMatrix,
    h: Hypothesis,
    kind: StatisticKind,
    rng: np.random.Generator,
    indices=None,
) -> float:
    """One nonparametric bootstrap replicate of ``kind``.

    ``indices`` forces the resample (used to check that the identity
    resample gives ``SSH = 0``). Degenerate resamples are redrawn.
    """
    n = resid.n
    c = h.c_matrix
    middle_inv = np.linalg.inv(c @ d.xtx_pinv @ c.T)
    fitted = d.x @ beta.beta_hat
    while True:
        idx = rng.integers(0, n, size=n) if indices is None else np.asarray(indices)
        ystar = fitted + resid.values[idx]
        beta_star = d.xtx_pinv @ d.x.T @ ystar
        diff = c @ (beta_star - beta.beta_hat)
        ssh = np.einsum("qt,qr,rt->t", diff, middle_inv, diff)
        sse = _sse_curve(d, ystar)
        if indices is not None or not _degenerate(sse, np.sum(ystar**2, axis=0)):
            break
    return _replicate_statistic(ssh, sse, resid.grid, h.q, d.dof, kind)


def parametric_null_replicate(
    gamma: CovarianceEstimate,
    d: DesignMatrix,
    h: Hypothesis,
    kind: StatisticKind,
    rng: np.random.Generator,
) -> float:
    """One parametric bootstrap replicate of ``kind``."""
    factor = gaussian_factor(gamma)
    if not np.any(factor):
        return 0.0
    c = h.c_matrix
    middle_inv = np.linalg.inv(c @ d.xtx_pinv @ c.T)
    t = factor.shape[0]
    while True:
        ystar = rng.standard_normal((d.n, t)) @ factor.T
        cb = c @ d.xtx_pinv @ d.x.T @ ystar
        ssh = np.einsum("qt,qr,rt->t", cb, middle_inv, cb)
        sse = _sse_curve(d, ystar)
        if not _degenerate(sse, np.sum(ystar**2, axis=0)):
            break
    return _replicate_statistic(ssh, sse, gamma.grid, h.q, d.dof, kind)


class _Engine:
    """Batched replicate computation for one (data, design, hypothesis)."""

    def __init__(self, y, d, op, bootstrap, key, gamma=None):
        self.d = d
        self.op = op
        self.bootstrap = bootstrap
        self.key = key
        self.n = d.n
        self.weights = trapezoid_weights(y.grid)
        self.t = len(y.grid)
        if bootstrap is BootstrapKind.NONPARAMETRIC:
            self.resid = d.residual_projector @ y.values
            self.factor = None
        else:
            if gamma is None:
                gamma = estimate_covariance(y, d)
            self.factor = gaussian_factor(gamma)
            self.resid = None
        spread = self.resid if self.resid is not None else self.factor.T
        col_norm = np.sqrt(np.sum(spread * spread, axis=0))
        self.null_model = col_norm.max() <= 1e-12 * max(1.0, np.abs(y.values).max())
        if not self.null_model and np.any(col_norm <= 1e-12 * col_norm.max()):
            raise DegenerateVarianceError(
                "the data have zero residual variance at some grid point"
            )

    def _draw(self, rng):
        if self.resid is not None:
            return self.resid[rng.integers(0, self.n, size=self.n)]
        return rng.standard_normal((self.n, self.t)) @ self.factor.T

    def _sums(self, ystar):
        # ystar: (B, n, T). SSE = |y|^2 - |U'y|^2 with U a basis of col(X);
        # SSH = |L^{-1} C (X'X)^+ X' y|^2, which equals the centred form
        # for the nonparametric scheme because C (X'X)^+ X'X = C.
        contrast = np.einsum("qn,bnt->bqt", self.op.estimator, ystar, optimize=True)
        ssh = np.einsum("bqt,bqt->bt", contrast, contrast)
        fit = np.einsum("nk,bnt->bkt", self.d.hat_basis, ystar, optimize=True)
        total = np.einsum("bnt,bnt->bt", ystar, ystar)
        sse = total - np.einsum("bkt,bkt->bt", fit, fit)
        return ssh, sse, total

    def run(self, start: int, stop: int):
        rngs = [replicate_stream(self.key, m) for m in range(start, stop)]
        ystar = np.stack([self._draw(rng) for rng in rngs])
        ssh, sse, total = self._sums(ystar)
        redraws = 0
        bad = np.any(sse <= DEGENERATE_SSE * np.maximum(total, np.finfo(float).tiny), axis=1)
        if self.null_model:
            # No variability at all: every replicate statistic is zero.
            bad[:] = False
            ssh = np.zeros_like(ssh)
            sse = np.ones_like(sse)
        for b in np.flatnonzero(bad):
            while True:
                redraws += 1
                if redraws > MAX_REDRAWS:
                    raise NumericError("bootstrap keeps producing degenerate samples")
                one = self._draw(rngs[b])[None]
                s_h, s_e, tot = self._sums(one)
                if not np.any(s_e <= DEGENERATE_SSE * np.maximum(tot, np.finfo(float).tiny)):
                    ssh[b], sse[b] = s_h[0], s_e[0]
                    break
        stats = batch_statistics(ssh, sse, self.weights, self.op.q, self.d.dof)
        return stats, redraws


def null_distribution(
    y: FunctionalDataset,
    d: DesignMatrix,
    h: Hypothesis,
    bootstrap: BootstrapKind,
    m: int = DEFAULT_M,
    seed: int = 0,
    workers: int = 1,
    op: ContrastOperator | None = None,
    gamma: CovarianceEstimate | None = None,
) -> tuple[dict[StatisticKind, np.ndarray], int]:
    """Bootstrap replicates of all four statistics.

    Returns the replicate arrays (length ``m``, indexed by replicate) and
    the number of degenerate draws that had to be redrawn.
    """
    if m < 1:
        raise InputError("the number of bootstrap replicates must be at least 1")
    if op is None:
        op = prepare_contrast(h, d)
    engine = _Engine(y, d, op, bootstrap, _stream_key(seed, _STREAM_TAG[bootstrap]), gamma)
    bounds = [(s, min(s + CHUNK, m)) for s in range(0, m, CHUNK)]
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: engine.run(*b), bounds))
    else:
        parts = [engine.run(*b) for b in bounds]
    out = {kind: np.concatenate([p[0][kind] for p in parts]) for kind in StatisticKind}
    redraws = sum(p[1] for p in parts)
    if redraws > REDRAW_WARN_RATE * m:
        warnings.warn(
            f"{redraws} degenerate bootstrap draws out of {m} had to be redrawn",
            stacklevel=2,
        )
    return out, redraws


def bootstrap_p_value(observed: float, replicates: np.ndarray) -> float:
    """Fraction of replicates strictly greater than the observed value."""
    replicates = np.asarray(replicates)
    return float(np.count_nonzero(replicates > observed) / replicates.size)


def bootstrap_tests(
    y: FunctionalDataset,
    d: DesignMatrix,
    h: Hypothesis,
    bootstrap: BootstrapKind,
    m: int = DEFAULT_M,
    seed: int = 0,
    kinds=tuple(StatisticKind),
    keep_replicates: bool = False,
    workers: int = 1,
) -> dict[StatisticKind, TestResult]:
    """Tests for several statistics sharing one set of bootstrap samples."""
    op = prepare_contrast(h, d)
    dec = decompose(y, d, h, op)
    observed = {kind: statistic(dec, kind) for kind in kinds}
    reps, redraws = null_distribution(y, d, h, bootstrap, m, seed, workers, op)
    results = {}
    for kind in kinds:
        results[kind] = TestResult(
            kind=kind,
            bootstrap=bootstrap,
            observed=observed[kind],
            p_value=bootstrap_p_value(observed[kind], reps[kind]),
            m_replicates=m,
            seed=seed,
            replicates=reps[kind] if keep_replicates else None,
            redraws=redraws,
        )
    return results


def bootstrap_test(
    y: FunctionalDataset,
    d: DesignMatrix,
    h: Hypothesis,
    kind: StatisticKind,
    bootstrap: BootstrapKind,
    m: int = DEFAULT_M,
    seed: int = 0,
    keep_replicates: bool = False,
    workers: int = 1,
) -> TestResult:
    """Bootstrap p-value for one statistic."""
    return bootstrap_tests(
        y, d, h, bootstrap, m, seed, (kind,), keep_replicates, workers
    )[kind]
