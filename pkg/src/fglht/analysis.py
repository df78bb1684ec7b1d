"""Factor-by-factor analysis of the audible-noise experiment.

Each factor is tested on its own with ``H0: alpha_j1(t) - alpha_j2(t) = 0``.
The same functions drive the data-based simulation that reports empirical
sizes (``beta = 0``) and powers (``beta = beta_hat``).
"""

from __future__ import annotations

from dataclasses import dataclass

from .bootstrap import BootstrapKind, bootstrap_tests
from .data import FACTOR_NAMES, build_contrast, build_factorial_design
from .model import DesignMatrix, FunctionalDataset, estimate_beta
from .simulation import (
    REPORTED_TESTS,
    SizePowerReport,
    _derive_seed,
    realdata_covariance,
    realdata_simulation,
)
from .stats import StatisticKind, reciprocal_shift_scale, scale_dataset

__all__ = ["factor_pvalues", "RealDataStudy", "realdata_study"]

# Label used in tables for each (statistic, bootstrap) pair.
_LABELS = {(kind, boot): label for label, kind, boot in REPORTED_TESTS}


def _kinds_for(boot: BootstrapKind) -> tuple[StatisticKind, ...]:
    return tuple(kind for (kind, b) in _LABELS if b is boot)


def factor_pvalues(
    y: FunctionalDataset,
    d: DesignMatrix | None = None,
    factors=FACTOR_NAMES,
    m: int = 1000,
    seed: int = 0,
    scaled: bool = False,
    workers: int = 1,
    tests=None,
) -> dict[str, dict[str, float]]:
    """Bootstrap p-values for each factor.

    Parameters
    ----------
    y : FunctionalDataset
        The 36 response curves.
    factors : iterable of str
        Factor names among ``A`` to ``G``.
    scaled : bool
        Multiply the curves by ``h(t) = 1 / (t + 1/43)`` first.
    tests : iterable of str, optional
        Column labels such as ``"G^nb"``; all six bootstrap tests by default.

    Returns
    -------
    dict
        ``{factor: {label: p_value}}``. Every factor uses the same seed.
    """
    d = d or build_factorial_design()
    if scaled:
        y = scale_dataset(y, reciprocal_shift_scale(y.grid))
    wanted = set(_LABELS.values()) if tests is None else set(tests)
    out = {}
    for name in factors:
        h = build_contrast(name)
        row = {}
        for boot in BootstrapKind:
            kinds = tuple(k for k in _kinds_for(boot) if _LABELS[(k, boot)] in wanted)
            if not kinds:
                continue
            res = bootstrap_tests(y, d, h, boot, m, seed, kinds=kinds, workers=workers)
            row.update({_LABELS[(k, boot)]: r.p_value for k, r in res.items()})
        out[name] = row
    return out


@dataclass
class RealDataStudy:
    size: SizePowerReport
    powers: dict[str, SizePowerReport]


def realdata_study(
    y: FunctionalDataset,
    d: DesignMatrix | None = None,
    factors=FACTOR_NAMES,
    n_sims: int = 500,
    m_boot: int = 500,
    seed: int = 0,
    scaled: bool = False,
    residual_cov: bool = False,
    size_factor: str = "A",
    workers: int = 1,
) -> RealDataStudy:
    """Sizes and powers for Gaussian data mimicking ``y``.

    The size is measured with ``beta = 0`` on the hypothesis for
    ``size_factor``; powers use ``beta = beta_hat`` for every factor.
    """
    d = d or build_factorial_design()
    sigma = realdata_covariance(y, d, residual=residual_cov)
    beta = estimate_beta(y, d)
    size = realdata_simulation(
        sigma, d, build_contrast(size_factor), None, n_sims, m_boot,
        _derive_seed(seed, 0), apply_scaling=scaled, workers=workers,
    )
    powers = {}
    for name in factors:
        j = FACTOR_NAMES.index(str(name).upper()) + 1
        powers[name] = realdata_simulation(
            sigma, d, build_contrast(name), beta, n_sims, m_boot,
            _derive_seed(seed, j), apply_scaling=scaled, workers=workers,
        )
    return RealDataStudy(size=size, powers=powers)
