"""Monte-Carlo size and power studies.

Subject effects come from one of three generators:

* ``case1``: truncated Fourier expansion with Gaussian scores of variance
  ``rho**s``;
* ``case2``: the same expansion with scaled Student t(4) scores, rescaled so
  that each score still has variance ``rho**s``;
* ``case3``: Brownian motion with variance ``0.09 * t``.

Responses are ``X (delta * beta_ref) + v``, optionally multiplied by
``h(t) = 1 / (t + 1/43)``. Every simulated dataset is tested with the
nonparametric bootstrap for T, F, G and Fmax and with the parametric
bootstrap for G and Fmax; the report holds the rejection rates.
"""

from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .bootstrap import BootstrapKind, bootstrap_p_value, gaussian_factor, null_distribution
from .data import reference_beta
from .errors import ConfigError, InputError
from .model import (
    CoefficientEstimate,
    CovarianceEstimate,
    DesignMatrix,
    FunctionalDataset,
    Hypothesis,
    TimeGrid,
    estimate_covariance,
)
from .stats import (
    ScaleFunction,
    StatisticKind,
    decompose,
    prepare_contrast,
    reciprocal_shift_scale,
    scale_hypothesis,
    statistic,
)

__all__ = [
    "WIENER_DISPERSION_SQ",
    "NoiseCase",
    "ScenarioConfig",
    "SizePowerReport",
    "REPORTED_TESTS",
    "fourier_basis",
    "gen_subject_effects",
    "gen_responses",
    "simulation_grid",
    "run_scenario",
    "realdata_simulation",
    "sample_covariance",
    "load_scenarios",
    "scenarios_from_dict",
]

log = logging.getLogger(__name__)

WIENER_DISPERSION_SQ = 0.3**2
CASES = ("case1", "case2", "case3")

# (column label, statistic, bootstrap) for every test the harness runs.
REPORTED_TESTS = (
    ("T^nb", StatisticKind.T_L2, BootstrapKind.NONPARAMETRIC),
    ("F^nb", StatisticKind.F_RATIO, BootstrapKind.NONPARAMETRIC),
    ("G^nb", StatisticKind.G_GLOBAL, BootstrapKind.NONPARAMETRIC),
    ("G^pb", StatisticKind.G_GLOBAL, BootstrapKind.PARAMETRIC),
    ("Fmax^nb", StatisticKind.F_MAX, BootstrapKind.NONPARAMETRIC),
    ("Fmax^pb", StatisticKind.F_MAX, BootstrapKind.PARAMETRIC),
)


@dataclass(frozen=True)
class NoiseCase:
    kind: str = "case1"
    rho: float | None = 0.5
    m0: int = 13

    def __post_init__(self):
        if self.kind not in CASES:
            raise InputError(f"unknown noise case {self.kind!r}")
        if self.kind == "case3":
            object.__setattr__(self, "rho", None)
        elif self.rho is None or not 0.0 < self.rho < 1.0:
            raise InputError("rho must lie in (0, 1)")
        if self.m0 < 1 or self.m0 % 2 == 0:
            raise InputError("m0 must be a positive odd integer")

    @property
    def label(self) -> str:
        return self.kind if self.rho is None else f"{self.kind}(rho={self.rho:g})"


@dataclass(frozen=True)
class ScenarioConfig:
    case: NoiseCase = field(default_factory=NoiseCase)
    delta: float = 0.0
    n_sims: int = 500
    m_boot: int = 500
    alpha: float = 0.05
    apply_scaling: bool = False
    grid_size: int = 43
    seed: int = 0
    beta_ref: CoefficientEstimate | None = None

    def __post_init__(self):
        if self.delta < 0:
            raise InputError("delta must be nonnegative")
        if self.n_sims < 1 or self.m_boot < 1:
            raise InputError("n_sims and m_boot must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise InputError("alpha must lie in (0, 1)")
        if self.grid_size < 2:
            raise InputError("grid_size must be at least 2")


@dataclass
class SizePowerReport:
    case: str
    rho: float | None
    delta: float
    scaled: bool
    n_sims: int
    m_boot: int
    seed: int
    alpha: float
    rejections: dict[str, int]
    wall_time: float = 0.0

    @property
    def rates(self) -> dict[str, float]:
        return {k: v / self.n_sims for k, v in self.rejections.items()}


def simulation_grid(size: int = 43) -> TimeGrid:
    return TimeGrid.uniform(size, 0.0, 1.0)


def fourier_basis(grid: TimeGrid, m0: int) -> np.ndarray:
    """Rows ``1, sqrt2 sin(2 pi t), sqrt2 cos(2 pi t), sqrt2 sin(4 pi t), ...``."""
    if m0 < 1 or m0 % 2 == 0:
        raise InputError("m0 must be a positive odd integer")
    t = grid.points
    rows = [np.ones_like(t)]
    for r in range(1, (m0 - 1) // 2 + 1):
        rows.append(math.sqrt(2) * np.sin(2 * math.pi * r * t))
        rows.append(math.sqrt(2) * np.cos(2 * math.pi * r * t))
    return np.array(rows)


def gen_subject_effects(
    case: NoiseCase, n: int, grid: TimeGrid, rng: np.random.Generator
) -> FunctionalDataset:
    t = grid.points
    if case.kind == "case3":
        # Brownian motion restricted to the grid. A path pinned at zero at
        # t = 0 would make the first pointwise variance vanish, so a grid
        # starting at 0 is shifted by one spacing.
        start = t[0] if t[0] > 0 else t[1] - t[0]
        steps = np.diff(t, prepend=t[0] - start)
        inc = rng.standard_normal((n, t.size)) * np.sqrt(WIENER_DISPERSION_SQ * steps)
        return FunctionalDataset(grid, np.cumsum(inc, axis=1))
    psi = fourier_basis(grid, case.m0)
    lam = case.rho ** np.arange(1, case.m0 + 1)
    if case.kind == "case1":
        scores = rng.standard_normal((n, case.m0)) * np.sqrt(lam)
    else:
        scores = rng.standard_t(4, size=(n, case.m0)) * np.sqrt(lam) / math.sqrt(2)
    return FunctionalDataset(grid, scores @ psi)


def gen_responses(
    d: DesignMatrix, beta: CoefficientEstimate, v: FunctionalDataset
) -> FunctionalDataset:
    """``y = X beta + v`` on the grid of ``v``."""
    if beta.beta_hat.shape != (d.n_params, len(v.grid)) or v.n != d.n:
        raise InputError("design, coefficients and subject effects disagree in size")
    return FunctionalDataset(v.grid, d.x @ beta.beta_hat + v.values)


def _on_grid(beta: CoefficientEstimate, grid: TimeGrid) -> CoefficientEstimate:
    if beta.grid == grid:
        return beta
    src = (beta.grid.points - beta.grid.points[0]) / (beta.grid.points[-1] - beta.grid.points[0])
    dst = (grid.points - grid.points[0]) / (grid.points[-1] - grid.points[0])
    return CoefficientEstimate(grid, np.array([np.interp(dst, src, row) for row in beta.beta_hat]))


def _derive_seed(seed: int, *path: int) -> int:
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=tuple(path))
    return int(ss.generate_state(1, np.uint64)[0])


def _test_dataset(y, d, h, op, m_boot, seed, alpha) -> dict[str, bool]:
    dec = decompose(y, d, h, op)
    observed = {kind: statistic(dec, kind) for kind in StatisticKind}
    reps = {}
    for boot in BootstrapKind:
        reps[boot], _ = null_distribution(y, d, h, boot, m_boot, seed, op=op)
    return {
        label: bootstrap_p_value(observed[kind], reps[boot][kind]) < alpha
        for label, kind, boot in REPORTED_TESTS
    }


@dataclass(frozen=True)
class _Job:
    """Everything a worker needs to run a block of simulated datasets."""

    kind: str
    d: DesignMatrix
    h: Hypothesis
    mean: np.ndarray
    grid: TimeGrid
    case: NoiseCase | None
    noise_factor: np.ndarray | None
    scale: np.ndarray | None
    m_boot: int
    alpha: float
    seed: int


def _run_block(job: _Job, sims: range) -> list[dict[str, bool]]:
    h = job.h
    if job.scale is not None:
        h = scale_hypothesis(h, ScaleFunction(job.scale))
    op = prepare_contrast(h, job.d)
    out = []
    for i in sims:
        rng = np.random.default_rng(np.random.SeedSequence(job.seed, spawn_key=(i, 0)))
        if job.case is not None:
            v = gen_subject_effects(job.case, job.d.n, job.grid, rng).values
        else:
            v = rng.standard_normal((job.d.n, len(job.grid))) @ job.noise_factor.T
        values = job.mean + v
        if job.scale is not None:
            values = values * job.scale
        y = FunctionalDataset(job.grid, values)
        out.append(_test_dataset(y, job.d, h, op, job.m_boot, _derive_seed(job.seed, i, 1), job.alpha))
    return out


def _execute(job: _Job, n_sims: int, workers: int) -> dict[str, int]:
    if workers > 1 and n_sims > 1:
        size = math.ceil(n_sims / workers)
        blocks = [range(s, min(s + size, n_sims)) for s in range(0, n_sims, size)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_block, [job] * len(blocks), blocks))
        decisions = [dec for part in parts for dec in part]
    else:
        decisions = _run_block(job, range(n_sims))
    return {label: sum(dec[label] for dec in decisions) for label, _, _ in REPORTED_TESTS}


def run_scenario(
    cfg: ScenarioConfig, d: DesignMatrix, h: Hypothesis, workers: int = 1
) -> SizePowerReport:
    """Empirical rejection rates for one (case, delta, scaling) cell."""
    start = time.perf_counter()
    grid = simulation_grid(cfg.grid_size)
    beta = _on_grid(cfg.beta_ref or reference_beta(), grid)
    scale = reciprocal_shift_scale(grid).values if cfg.apply_scaling else None
    job = _Job(
        kind="scenario",
        d=d,
        h=h,
        mean=d.x @ (cfg.delta * beta.beta_hat),
        grid=grid,
        case=cfg.case,
        noise_factor=None,
        scale=scale,
        m_boot=cfg.m_boot,
        alpha=cfg.alpha,
        seed=cfg.seed,
    )
    rejections = _execute(job, cfg.n_sims, workers)
    report = SizePowerReport(
        case=cfg.case.kind,
        rho=cfg.case.rho,
        delta=cfg.delta,
        scaled=cfg.apply_scaling,
        n_sims=cfg.n_sims,
        m_boot=cfg.m_boot,
        seed=cfg.seed,
        alpha=cfg.alpha,
        rejections=rejections,
        wall_time=time.perf_counter() - start,
    )
    log.info("%s delta=%g scaled=%s done in %.1fs", cfg.case.label, cfg.delta,
             cfg.apply_scaling, report.wall_time)
    return report


def sample_covariance(y: FunctionalDataset) -> CovarianceEstimate:
    """Ordinary sample covariance of the raw curves (divisor ``n - 1``)."""
    if y.n < 2:
        raise InputError("need at least two curves for a sample covariance")
    return CovarianceEstimate(y.grid, np.cov(y.values, rowvar=False), y.n - 1)


def realdata_simulation(
    sigma: CovarianceEstimate,
    d: DesignMatrix,
    h: Hypothesis,
    beta: CoefficientEstimate | None,
    n_sims: int,
    m_boot: int,
    seed: int,
    alpha: float = 0.05,
    apply_scaling: bool = False,
    workers: int = 1,
) -> SizePowerReport:
    """Rejection rates for Gaussian curves with mean ``X beta`` and covariance ``sigma``.

    ``beta=None`` means ``beta(t) = 0`` (size study).
    """
    start = time.perf_counter()
    grid = sigma.grid
    mean = np.zeros((d.n, len(grid))) if beta is None else d.x @ beta.beta_hat
    job = _Job(
        kind="realdata",
        d=d,
        h=h,
        mean=mean,
        grid=grid,
        case=None,
        noise_factor=gaussian_factor(sigma),
        scale=reciprocal_shift_scale(grid).values if apply_scaling else None,
        m_boot=m_boot,
        alpha=alpha,
        seed=seed,
    )
    rejections = _execute(job, n_sims, workers)
    return SizePowerReport(
        case="realdata",
        rho=None,
        delta=0.0 if beta is None else 1.0,
        scaled=apply_scaling,
        n_sims=n_sims,
        m_boot=m_boot,
        seed=seed,
        alpha=alpha,
        rejections=rejections,
        wall_time=time.perf_counter() - start,
    )


def realdata_covariance(y: FunctionalDataset, d: DesignMatrix, residual: bool = False):
    """Covariance for the data-based study: raw-curve sample covariance by default."""
    return estimate_covariance(y, d) if residual else sample_covariance(y)


# -- scenario files -------------------------------------------------------

_TOP_KEYS = {"name", "description", "n_sims", "m_boot", "alpha", "seed", "grid_size",
             "apply_scaling", "m0", "cells", "case", "rho", "delta", "deltas"}
_CELL_KEYS = {"case", "rho", "m0", "delta", "deltas", "apply_scaling", "n_sims", "m_boot",
              "alpha", "grid_size"}


def _field(src: dict, key: str, kind, where: str, default=None):
    if key not in src:
        if default is None:
            raise ConfigError(f"{where}: missing required field '{key}'")
        return default
    value = src[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if kind is bool and not isinstance(value, bool):
        raise ConfigError(f"{where}: field '{key}' must be a boolean")
    if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
        raise ConfigError(f"{where}: field '{key}' must be of type {kind.__name__}")
    return value


def _cell_seed(seed: int, case: NoiseCase, delta: float) -> int:
    case_id = CASES.index(case.kind)
    rho_id = 0 if case.rho is None else int(round(case.rho * 1000))
    return _derive_seed(seed, case_id, rho_id, int(round(delta * 1_000_000)))


def scenarios_from_dict(doc: dict) -> tuple[str, list[ScenarioConfig]]:
    """Expand a scenario document into one config per (cell, delta).

    Top-level keys act as defaults for every cell. Seeds are derived from
    the base seed and the (case, rho, delta) triple, so scaled and unscaled
    runs of the same cell see the same simulated noise.
    """
    if not isinstance(doc, dict):
        raise ConfigError("scenario file must contain a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level field(s): {', '.join(sorted(unknown))}")
    name = doc.get("name", "scenario")
    cells = doc.get("cells")
    if cells is None:
        cells = [{k: doc[k] for k in ("case", "rho", "delta", "deltas") if k in doc}]
    if not isinstance(cells, list) or not cells:
        raise ConfigError("field 'cells' must be a non-empty list")
    seed = _field(doc, "seed", int, "scenario")
    configs = []
    for i, cell in enumerate(cells):
        where = f"cells[{i}]"
        if not isinstance(cell, dict):
            raise ConfigError(f"{where}: must be an object")
        unknown = set(cell) - _CELL_KEYS
        if unknown:
            raise ConfigError(f"{where}: unknown field(s): {', '.join(sorted(unknown))}")
        merged = {k: v for k, v in doc.items() if k in _CELL_KEYS and k != "case"}
        merged.update(cell)
        kind = _field(merged, "case", str, where)
        if kind not in CASES:
            raise ConfigError(f"{where}: field 'case' must be one of {', '.join(CASES)}")
        rho = None if kind == "case3" else _field(merged, "rho", float, where)
        try:
            case = NoiseCase(kind, rho, _field(merged, "m0", int, where, 13))
        except InputError as exc:
            raise ConfigError(f"{where}: {exc}") from None
        if "deltas" in merged:
            deltas = merged["deltas"]
            if not isinstance(deltas, list) or not deltas:
                raise ConfigError(f"{where}: field 'deltas' must be a non-empty list")
        else:
            deltas = [_field(merged, "delta", float, where)]
        for delta in deltas:
            if not isinstance(delta, (int, float)) or isinstance(delta, bool) or delta < 0:
                raise ConfigError(f"{where}: field 'deltas' must hold nonnegative numbers")
            try:
                configs.append(ScenarioConfig(
                    case=case,
                    delta=float(delta),
                    n_sims=_field(merged, "n_sims", int, where, 500),
                    m_boot=_field(merged, "m_boot", int, where, 500),
                    alpha=_field(merged, "alpha", float, where, 0.05),
                    apply_scaling=_field(merged, "apply_scaling", bool, where, False),
                    grid_size=_field(merged, "grid_size", int, where, 43),
                    seed=_cell_seed(seed, case, float(delta)),
                ))
            except InputError as exc:
                raise ConfigError(f"{where}: {exc}") from None
    return name, configs


def load_scenarios(path, seed: int | None = None) -> tuple[str, list[ScenarioConfig]]:
    """Read a scenario file; ``seed`` replaces the file's base seed."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if seed is not None and isinstance(doc, dict):
        doc = {**doc, "seed": seed}
    return scenarios_from_dict(doc)


def with_beta(configs, beta: CoefficientEstimate) -> list[ScenarioConfig]:
    return [replace(c, beta_ref=beta) for c in configs]
