import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fglht.data import build_contrast, contrast_matrix
from fglht.errors import (
    DegenerateVarianceError,
    DegreesOfFreedomError,
    InputError,
)
from fglht.model import (
    FunctionalDataset,
    Hypothesis,
    TimeGrid,
    build_design,
    check_estimable,
    estimate_beta,
    estimate_covariance,
    moore_penrose_pinv,
    variance_diagonal,
)
from fglht.simulation import NoiseCase, fourier_basis, gen_subject_effects, simulation_grid

from .oracles import elimination_ginverse, rank_by_row_reduction


def _penrose_residuals(a, g):
    return (
        np.max(np.abs(a @ g @ a - a)),
        np.max(np.abs(g @ a @ g - g)),
        np.max(np.abs((a @ g).T - a @ g)),
        np.max(np.abs((g @ a).T - g @ a)),
    )


@settings(max_examples=40, deadline=None)
@given(
    rows=st.integers(2, 9),
    cols=st.integers(2, 9),
    rank=st.integers(1, 4),
    seed=st.integers(0, 2**32 - 1),
)
def test_pinv_penrose_conditions(rows, cols, rank, seed):
    rng = np.random.default_rng(seed)
    rank = min(rank, rows, cols)
    a = rng.normal(size=(rows, rank)) @ rng.normal(size=(rank, cols))
    g = moore_penrose_pinv(a)
    scale = max(1.0, np.max(np.abs(a)), np.max(np.abs(g)))
    assert max(_penrose_residuals(a, g)) <= 1e-8 * scale**3


def test_pinv_of_zero_and_identity():
    assert np.array_equal(moore_penrose_pinv(np.zeros((3, 2))), np.zeros((2, 3)))
    assert np.allclose(moore_penrose_pinv(np.eye(4)), np.eye(4))


def test_pinv_rejects_non_finite():
    with pytest.raises(InputError):
        moore_penrose_pinv([[1.0, np.nan]])


def test_factorial_design_rank_matches_exact_row_reduction(design):
    assert design.x.shape == (36, 15)
    assert design.rank_k == rank_by_row_reduction(design.x) == 8
    assert design.dof == 28


def test_pinv_of_xtx_satisfies_penrose(design):
    xtx = design.x.T @ design.x
    assert max(_penrose_residuals(xtx, design.xtx_pinv)) < 1e-10


def test_residual_projector_is_symmetric_idempotent(design):
    r = design.residual_projector
    assert np.allclose(r, r.T, atol=1e-12)
    assert np.allclose(r @ r, r, atol=1e-12)
    assert np.allclose(r @ design.x, 0.0, atol=1e-10)
    assert np.isclose(np.trace(r), design.dof)


def test_contrasts_invariant_to_choice_of_ginverse(design):
    xtx = design.x.T @ design.x
    alt = elimination_ginverse(xtx)
    assert np.allclose(xtx @ alt @ xtx, xtx, atol=1e-9)
    assert not np.allclose(alt, design.xtx_pinv, atol=1e-3)
    y = np.random.default_rng(3).normal(size=(36, 5))
    c = contrast_matrix()
    assert np.allclose(c @ alt @ design.x.T @ y, c @ design.xtx_pinv @ design.x.T @ y, atol=1e-8)


def test_estimability(design):
    assert check_estimable(build_contrast("all"), design)
    single_level = np.zeros((1, 15))
    single_level[0, 1] = 1.0  # alpha_11 alone is not estimable
    assert not check_estimable(Hypothesis(single_level), design)


def test_full_rank_design_reduces_to_least_squares():
    rng = np.random.default_rng(5)
    x = np.column_stack([np.ones(25), rng.normal(size=(25, 3))])
    d = build_design(x)
    assert d.rank_k == 4
    y = FunctionalDataset(TimeGrid.uniform(9), rng.normal(size=(25, 9)))
    ols = np.linalg.lstsq(x, y.values, rcond=None)[0]
    assert np.allclose(estimate_beta(y, d).beta_hat, ols, atol=1e-8)
    resid = y.values - x @ ols
    gamma = estimate_covariance(y, d).gamma_hat
    assert np.allclose(gamma, resid.T @ resid / 21, atol=1e-10)


def test_estimable_functions_are_unbiased(design):
    """Monte-Carlo mean of C beta_hat matches C beta."""
    grid = TimeGrid.uniform(5)
    rng = np.random.default_rng(17)
    beta = rng.normal(size=(15, 5))
    c = contrast_matrix()
    reps = 2000
    acc = np.zeros((7, 5))
    for _ in range(reps):
        y = FunctionalDataset(grid, design.x @ beta + rng.normal(size=(36, 5)))
        acc += c @ estimate_beta(y, design).beta_hat
    se = np.sqrt(np.diag(c @ design.xtx_pinv @ c.T))[:, None] / np.sqrt(reps)
    assert np.all(np.abs(acc / reps - c @ beta) < 4 * se)


def test_covariance_estimate_unbiased_for_case1(design):
    grid = simulation_grid(11)
    case = NoiseCase("case1", 0.5)
    psi = fourier_basis(grid, case.m0)
    exact = (psi.T * case.rho ** np.arange(1, case.m0 + 1)) @ psi
    rng = np.random.default_rng(23)
    reps = 400
    acc = np.zeros_like(exact)
    for _ in range(reps):
        acc += estimate_covariance(gen_subject_effects(case, 36, grid, rng), design).gamma_hat
    assert np.max(np.abs(acc / reps - exact)) < 0.1 * np.max(np.diag(exact))


def test_covariance_needs_positive_dof():
    d = build_design(np.eye(3))
    y = FunctionalDataset(TimeGrid.uniform(4), np.ones((3, 4)))
    with pytest.raises(DegreesOfFreedomError):
        estimate_covariance(y, d)


def test_variance_diagonal_clamps_only_rounding_noise():
    assert np.array_equal(variance_diagonal(np.diag([1.0, -1e-13])), [1.0, 0.0])
    with pytest.raises(DegenerateVarianceError):
        variance_diagonal(np.diag([1.0, -1e-6]))


@pytest.mark.parametrize(
    "points",
    [[0.0], [0.0, 0.0, 1.0], [1.0, 0.5], [0.0, np.inf]],
)
def test_time_grid_validation(points):
    with pytest.raises(InputError):
        TimeGrid(np.array(points))


def test_dataset_shape_checks():
    with pytest.raises(InputError):
        FunctionalDataset(TimeGrid.uniform(4), np.ones((3, 5)))
    y = FunctionalDataset(TimeGrid.uniform(4), np.ones((3, 4)))
    with pytest.raises(ValueError):
        y.values[0, 0] = 2.0


def test_hypothesis_requires_full_row_rank():
    with pytest.raises(InputError):
        Hypothesis(np.array([[1.0, 0.0], [2.0, 0.0]]))
    h = Hypothesis(np.array([1.0, -1.0]))
    assert h.q == 1
    assert h.null_values(3).shape == (1, 3)
