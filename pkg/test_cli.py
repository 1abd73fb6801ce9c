#!/usr/bin/env python3
"""
Tests for the command-line surface: exit codes, outputs and reproducibility
"""
import json
import os
import sys

import numpy as np
import pandas as pd
import pytest

sys.path.append(os.path.join(os.path.dirname(os.path.abspath(__file__)), 'src'))

from main import main
from orchestrator import EXIT_CONFIG, EXIT_SUCCESS, get_orchestrator
from pricing import black_scholes_call

BS_MODEL = {"kind": "bs-limit", "s0": 100.0, "v0": 0.3, "theta": 0.3, "xi": 0.8, "rho": -0.7}


def write_config(tmp_path, name, payload) -> str:
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def price_config(tmp_path) -> str:
    return write_config(tmp_path, "price.json", {
        "model": BS_MODEL,
        "cos": {"n_terms": 512, "range_width": 12.0},
        "quotes": [
            {"maturity": 1.0, "strike": 100.0},
            {"maturity": 1.0, "strike": 0.0},
            {"maturity": 0.25, "log_moneyness": 0.05},
        ],
    })


def test_price_run_matches_black_scholes(tmp_path):
    out = tmp_path / "out"
    assert main(["price", "--config", price_config(tmp_path), "--out", str(out), "--threads", "1"]) == EXIT_SUCCESS
    frame = pd.read_csv(out / "prices.csv")
    assert list(frame.columns) == ["maturity_years", "strike", "log_moneyness", "call_price", "implied_vol"]
    sigma = np.sqrt(0.3)
    assert frame["call_price"][0] == pytest.approx(black_scholes_call(100.0, 100.0, 1.0, sigma), abs=1e-6)
    assert frame["call_price"][1] == pytest.approx(100.0)
    assert np.isnan(frame["implied_vol"][1])
    assert frame["strike"][2] == pytest.approx(100.0 * np.exp(0.05))
    assert frame["implied_vol"][2] == pytest.approx(sigma, abs=1e-6)

    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "price"
    assert manifest["exit_code"] == EXIT_SUCCESS
    assert manifest["outputs"] == ["prices.csv"]


def test_repeated_runs_are_byte_identical(tmp_path):
    config = price_config(tmp_path)
    first, second = tmp_path / "a", tmp_path / "b"
    assert main(["price", "--config", config, "--out", str(first)]) == EXIT_SUCCESS
    assert main(["price", "--config", config, "--out", str(second)]) == EXIT_SUCCESS
    assert (first / "prices.csv").read_bytes() == (second / "prices.csv").read_bytes()


def test_simulation_depends_only_on_seed(tmp_path):
    config = write_config(tmp_path, "simulate.json", {
        "model": {"kind": "nig-limit", "s0": 100.0, "v0": 0.3, "theta": 0.3, "xi": 0.8, "rho": -0.7},
        "n_paths": 3000,
        "times": [0.5, 1.0],
        "chunk_size": 1000,
    })
    runs = []
    for name, threads in (("one", "1"), ("three", "3")):
        out = tmp_path / name
        assert main(["simulate", "--config", config, "--out", str(out), "--seed", "5", "--threads", threads]) == 0
        runs.append((out / "simulation_cf.csv").read_bytes())
    assert runs[0] == runs[1]
    manifest = json.loads((tmp_path / "one" / "manifest.json").read_text())
    assert manifest["seed"] == 5


def test_smile_and_skew_of_black_scholes_limit(tmp_path):
    smile_config = write_config(tmp_path, "smile.json", {
        "model": BS_MODEL,
        "cos": {"n_terms": 512, "range_width": 12.0},
        "maturities": [0.5, 1.0],
        "log_moneyness": [-0.1, 0.0, 0.1],
    })
    assert main(["smile", "--config", smile_config, "--out", str(tmp_path / "smile")]) == EXIT_SUCCESS
    vols = pd.read_csv(tmp_path / "smile" / "smile.csv")["implied_vol"].to_numpy()
    assert len(vols) == 6
    assert np.all(np.abs(vols - np.sqrt(0.3)) < 1e-6)

    skew_config = write_config(tmp_path, "skew.json", {
        "model": BS_MODEL,
        "cos": {"n_terms": 512, "range_width": 12.0},
        "maturities": [0.25, 1.0],
    })
    assert main(["skew", "--config", skew_config, "--out", str(tmp_path / "skew")]) == EXIT_SUCCESS
    table = pd.read_csv(tmp_path / "skew" / "skew.csv")
    assert list(table.columns) == ["maturity_years", "atm_skew"]
    assert np.all(table["atm_skew"].abs() < 1e-3)


def test_converge_writes_one_table_per_regime(tmp_path):
    config = write_config(tmp_path, "converge.json", {
        "model": {"kind": "reversionary", "s0": 1.0, "v0": 0.3, "theta": 0.3, "xi": 0.8, "rho": -0.7,
                  "eps": 21.0, "eps_unit": "days", "H": -0.5},
        "regimes": ["above", "at"],
        "eps_days": [21.0, 1e-5],
        "us": [0.0, 1.0, 5.0],
        "v": 1.0,
    })
    out = tmp_path / "out"
    assert main(["converge", "--config", config, "--out", str(out)]) == EXIT_SUCCESS
    assert sorted(os.listdir(out)) == ["convergence_above.csv", "convergence_at.csv", "manifest.json"]
    table = pd.read_csv(out / "convergence_at.csv")
    errors = table.groupby("eps_days")["abs_err"].max()
    assert errors[1e-5] < errors[21.0]


def test_unconverged_calibration_exits_with_its_own_code(tmp_path):
    config = write_config(tmp_path, "calibrate.json", {
        "target_model": {"kind": "reversionary", "s0": 1.0, "v0": 0.02, "theta": 0.02, "xi": 0.3,
                         "rho": -0.7, "eps": 0.05, "H": -0.3},
        "maturities": [0.25, 1.0],
        "log_moneyness": [-0.1, 0.0, 0.1],
        "calibration": {"eps0": 0.08, "H0": -0.25, "maxiter": 3, "restarts": 0, "loss_threshold": 0.0,
                        "s0": 1.0, "v0": 0.02, "theta": 0.02, "xi": 0.3, "rho": -0.7},
    })
    out = tmp_path / "out"
    assert main(["calibrate", "--config", config, "--out", str(out)]) == 4
    summary = json.loads((out / "calibration.json").read_text())
    assert summary["converged"] is False
    assert (out / "target_surface.csv").exists() and (out / "calibration_trace.csv").exists()


def test_missing_config_file_is_a_config_error(tmp_path):
    out = tmp_path / "out"
    code = main(["price", "--config", str(tmp_path / "absent.json"), "--out", str(out)])
    assert code == EXIT_CONFIG
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "error" and manifest["outputs"] == []


@pytest.mark.parametrize("payload", [
    {"model": BS_MODEL, "quotes": []},
    {"model": BS_MODEL, "quotes": [{"maturity": 1.0}]},
    {"model": {**BS_MODEL, "rho": 2.0}, "quotes": [{"maturity": 1.0, "strike": 100.0}]},
    {"model": {**BS_MODEL, "kind": "reversionary"}, "quotes": [{"maturity": 1.0, "strike": 100.0}]},
    {"model": BS_MODEL, "quotes": [{"maturity": 1.0, "strike": 100.0}], "unknown": 1},
])
def test_bad_configs_exit_with_config_code(tmp_path, payload):
    config = write_config(tmp_path, "bad.json", payload)
    assert main(["price", "--config", config, "--out", str(tmp_path / "out")]) == EXIT_CONFIG


def test_malformed_json_is_a_config_error(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    assert main(["price", "--config", str(path), "--out", str(tmp_path / "out")]) == EXIT_CONFIG


def test_unknown_command_is_reported(tmp_path):
    result = get_orchestrator().run("hedge", price_config(tmp_path), str(tmp_path / "out"))
    assert result["exit_code"] == EXIT_CONFIG
    assert "hedge" in result["error"]


def test_command_listing():
    commands = get_orchestrator().list_commands()
    assert set(commands) == {"price", "converge", "smile", "skew", "calibrate", "simulate"}


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
