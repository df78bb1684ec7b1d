import json

import numpy as np
import pytest

from fglht.data import build_contrast, reference_beta
from fglht.errors import ConfigError, InputError
from fglht.model import TimeGrid
from fglht.simulation import (
    WIENER_DISPERSION_SQ,
    NoiseCase,
    ScenarioConfig,
    fourier_basis,
    gen_responses,
    gen_subject_effects,
    load_scenarios,
    realdata_simulation,
    run_scenario,
    sample_covariance,
    scenarios_from_dict,
    simulation_grid,
)

HYP = build_contrast("all")


def test_fourier_basis_is_orthonormal():
    grid = TimeGrid.uniform(201)
    psi = fourier_basis(grid, 13)
    gram = np.array([[np.trapezoid(a * b, grid.points) for b in psi] for a in psi])
    assert np.allclose(gram, np.eye(13), atol=1e-3)
    assert np.isclose(fourier_basis(TimeGrid(np.array([0.0, 0.25, 1.0])), 3)[1, 1], np.sqrt(2))


@pytest.mark.parametrize("rho", [0.1, 0.5, 0.9])
def test_case1_pointwise_variance(rho):
    grid = simulation_grid()
    case = NoiseCase("case1", rho)
    psi = fourier_basis(grid, 13)
    exact = (psi**2 * (rho ** np.arange(1, 14))[:, None]).sum(axis=0)
    v = gen_subject_effects(case, 20000, grid, np.random.default_rng(1)).values
    assert np.allclose(v.var(axis=0), exact, rtol=0.1)


def test_case2_scores_have_variance_lambda():
    grid = simulation_grid()
    case = NoiseCase("case2", 0.5)
    v = gen_subject_effects(case, 20000, grid, np.random.default_rng(2)).values
    scores = np.linalg.lstsq(fourier_basis(grid, 13).T, v.T, rcond=None)[0]
    assert np.allclose(scores.var(axis=1), 0.5 ** np.arange(1, 14), rtol=0.1)


def test_case3_is_a_scaled_wiener_process():
    grid = simulation_grid()
    v = gen_subject_effects(NoiseCase("case3"), 5000, grid, np.random.default_rng(3)).values
    assert np.isclose(v[:, -1].var(), WIENER_DISPERSION_SQ, rtol=0.1)
    assert np.all(v.var(axis=0) > 0)
    # Independent increments: Cov(v(s), v(t)) = 0.09 * min(s, t) on the shifted grid.
    cov = np.cov(v[:, [10, 30]], rowvar=False)
    assert np.isclose(cov[0, 1], cov[0, 0], rtol=0.1)


def test_correlation_between_neighbours_falls_with_rho():
    grid = simulation_grid()
    corr = []
    for rho in (0.1, 0.5, 0.9):
        v = gen_subject_effects(NoiseCase("case1", rho), 4000, grid, np.random.default_rng(4))
        corr.append(np.corrcoef(v.values[:, 5], v.values[:, 9])[0, 1])
    assert corr[0] > corr[1] > corr[2]


def test_noise_case_validation():
    with pytest.raises(InputError):
        NoiseCase("case1", 1.5)
    with pytest.raises(InputError):
        NoiseCase("case4", 0.5)
    assert NoiseCase("case3", 0.5).rho is None


def test_gen_responses_adds_the_mean(design):
    grid = simulation_grid()
    v = gen_subject_effects(NoiseCase(), 36, grid, np.random.default_rng(5))
    beta = reference_beta()
    y = gen_responses(design, beta, v)
    assert np.allclose(y.values - v.values, design.x @ beta.beta_hat)


def test_scenario_is_reproducible_and_workers_do_not_matter(design):
    cfg = ScenarioConfig(NoiseCase("case1", 0.3), delta=0.1, n_sims=6, m_boot=40, seed=12)
    a = run_scenario(cfg, design, HYP)
    b = run_scenario(cfg, design, HYP, workers=2)
    assert a.rejections == b.rejections


def test_strong_signal_gives_full_power_and_rates_are_fractions(design):
    cfg = ScenarioConfig(NoiseCase("case1", 0.5), delta=1.0, n_sims=5, m_boot=50, seed=3)
    rep = run_scenario(cfg, design, HYP)
    assert all(rep.rates[k] == 1.0 for k in ("G^nb", "G^pb", "Fmax^nb", "Fmax^pb"))


def test_scaling_leaves_nonparametric_new_tests_unchanged(design):
    base = dict(case=NoiseCase("case1", 0.5), delta=0.1, n_sims=8, m_boot=60, seed=77)
    plain = run_scenario(ScenarioConfig(**base), design, HYP)
    scaled = run_scenario(ScenarioConfig(**base, apply_scaling=True), design, HYP)
    for k in ("G^nb", "Fmax^nb"):
        assert plain.rejections[k] == scaled.rejections[k]


def test_small_null_study_is_not_wildly_off(design):
    cfg = ScenarioConfig(NoiseCase("case1", 0.5), delta=0.0, n_sims=60, m_boot=100, seed=21)
    rep = run_scenario(cfg, design, HYP)
    # 60 datasets: 99.9% binomial upper bound for 5% is about 17%.
    assert all(rep.rates[k] <= 0.17 for k in ("G^nb", "G^pb", "Fmax^nb", "Fmax^pb"))


def test_realdata_simulation_uses_the_covariance(design):
    grid = simulation_grid(15)
    rng = np.random.default_rng(8)
    y = gen_subject_effects(NoiseCase("case1", 0.5), 36, grid, rng)
    sigma = sample_covariance(y)
    assert np.allclose(sigma.gamma_hat, np.cov(y.values, rowvar=False))
    rep = realdata_simulation(sigma, design, build_contrast("A"), None, 4, 30, seed=1)
    assert rep.n_sims == 4 and set(rep.rates) >= {"G^nb", "Fmax^pb"}


def test_scenario_document_expansion():
    doc = {
        "seed": 5,
        "n_sims": 10,
        "m_boot": 20,
        "cells": [
            {"case": "case1", "rho": 0.5, "deltas": [0, 0.1]},
            {"case": "case3", "delta": 0.02, "apply_scaling": True},
        ],
    }
    name, configs = scenarios_from_dict(doc)
    assert len(configs) == 3
    assert configs[2].apply_scaling and configs[2].case.kind == "case3"
    assert len({c.seed for c in configs}) == 3
    scaled_doc = {**doc, "apply_scaling": True}
    _, scaled = scenarios_from_dict(scaled_doc)
    assert [c.seed for c in scaled] == [c.seed for c in configs]


@pytest.mark.parametrize(
    "doc, field",
    [
        ({"cells": [{"case": "case1", "rho": 0.5, "delta": 0}]}, "seed"),
        ({"seed": 1, "cells": [{"case": "case1", "delta": 0}]}, "rho"),
        ({"seed": 1, "cells": [{"case": "case9", "rho": 0.5, "delta": 0}]}, "case"),
        ({"seed": 1, "cells": [{"case": "case1", "rho": 0.5, "delta": "x"}]}, "delta"),
        ({"seed": 1, "n_sims": "many", "cells": [{"case": "case3", "delta": 0}]}, "n_sims"),
        ({"seed": 1, "bogus": 1, "cells": [{"case": "case3", "delta": 0}]}, "bogus"),
    ],
)
def test_invalid_scenarios_name_the_field(doc, field):
    with pytest.raises(ConfigError, match=field):
        scenarios_from_dict(doc)


def test_load_scenarios_seed_override(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"seed": 1, "cells": [{"case": "case3", "delta": 0}]}))
    _, a = load_scenarios(path)
    _, b = load_scenarios(path, seed=2)
    assert a[0].seed != b[0].seed
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_scenarios(path)
