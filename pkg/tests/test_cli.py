import json

import numpy as np
import pytest

from fglht.cli import main
from fglht.data import surrogate_curves, write_noise_csv


@pytest.fixture
def noise_csv(tmp_path):
    path = tmp_path / "noise.csv"
    write_noise_csv(path, surrogate_curves().values, np.linspace(1000, 2500, 43))
    return path


def _csv_row(out: str) -> dict:
    head, row = out.strip().splitlines()[-2:]
    return dict(zip(head.split(","), row.split(",")))


def test_test_command_prints_csv(noise_csv, capsys):
    assert main(["test", "--data", str(noise_csv), "--factor", "G", "--stat", "fmax",
                 "--boot", "pb", "--M", "200", "--seed", "1"]) == 0
    row = _csv_row(capsys.readouterr().out)
    assert row["factor"] == "G" and row["boot"] == "pb"
    assert float(row["p_value"]) == 0.0 and row["decision"] == "reject"


def test_scaled_nonparametric_p_value_matches_unscaled(noise_csv, capsys):
    args = ["test", "--data", str(noise_csv), "--factor", "A", "--stat", "fmax",
            "--boot", "nb", "--M", "300", "--seed", "4"]
    main(args)
    plain = _csv_row(capsys.readouterr().out)
    main(args + ["--scaled"])
    scaled = _csv_row(capsys.readouterr().out)
    assert plain["p_value"] == scaled["p_value"]


def test_all_prints_factor_grid(noise_csv, capsys, tmp_path):
    out = tmp_path / "out"
    assert main(["test", "--data", str(noise_csv), "--all", "--M", "50", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert len(text.strip().splitlines()) == 8
    assert (out / "pvalues.csv").is_file()


def test_missing_data_exit_code(tmp_path, monkeypatch, capsys):
    monkeypatch.delenv("FGLHT_NOISE_DATA", raising=False)
    assert main(["test", "--factor", "A"]) == 3
    err = capsys.readouterr().err
    assert "FGLHT_NOISE_DATA" in err and "fetch" in err


def test_fit_writes_beta(noise_csv, tmp_path, capsys):
    assert main(["fit", "--data", str(noise_csv), "--out", str(tmp_path)]) == 0
    assert "design rank: 8" in capsys.readouterr().out
    assert (tmp_path / "beta_hat.csv").is_file()


def _scenario(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps({
        "name": "tiny", "seed": 3, "n_sims": 3, "m_boot": 40,
        "cells": [{"case": "case1", "rho": 0.5, "deltas": [0, 0.2]}],
    }))
    return path


def test_simulate_is_identical_across_thread_budgets(tmp_path, capsys):
    path = _scenario(tmp_path)
    assert main(["simulate", str(path), "--out", str(tmp_path / "a")]) == 0
    assert main(["simulate", str(path), "--threads", "2", "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "tiny.csv").read_bytes()
    assert a == (tmp_path / "b" / "tiny.csv").read_bytes()
    assert (tmp_path / "a" / "tiny.txt").is_file()
    assert "G^nb" in capsys.readouterr().out


def test_bundled_smoke_scenario(tmp_path, capsys):
    assert main(["simulate", "smoke", "--out", str(tmp_path)]) == 0
    for line in (tmp_path / "smoke.csv").read_text().splitlines()[1:]:
        rates = [c for c in line.split(",")[7:] if c != "n/a"]
        assert set(rates) <= {"0.0", "100.0"}


def test_invalid_scenario_names_field(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"seed": 1, "cells": [{"case": "case1", "delta": 0}]}))
    assert main(["simulate", str(path)]) == 2
    assert "rho" in capsys.readouterr().err


def test_logs_stay_off_stdout(noise_csv, capsys):
    main(["test", "--data", str(noise_csv), "--factor", "B", "--M", "20"])
    captured = capsys.readouterr()
    assert "INFO" not in captured.out and "WARNING" not in captured.out


def test_surrogate_flag_warns_on_stderr(capsys):
    assert main(["test", "--surrogate", "--factor", "D", "--M", "20"]) == 0
    assert "surrogate" in capsys.readouterr().err


def test_reproduce_table_rejects_unknown_index(capsys):
    with pytest.raises(SystemExit):
        main(["reproduce-table", "9"])
