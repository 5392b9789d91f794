"""
Test the homupconv command-line entry point
"""
import json
from pathlib import Path

import pytest

from app import main
from core.hom import beating_period
from core.reports import read_curve_csv

SCENARIOS = Path(__file__).parent / "scenarios"

IDEAL = {
    "source": {"mean_pairs_per_pulse": 0.05, "raman_mean_signal": 0.0, "raman_mean_idler": 0.0},
    "converter_signal": {"pump_frequency_thz": 226.477, "peak_efficiency": 1.0, "response_center_thz": 193.676,
                         "response_fwhm_ghz": "inf", "noise_rate_cps": 0.0},
    "converter_idler": {"pump_frequency_thz": 227.274, "peak_efficiency": 1.0, "response_center_thz": 192.879,
                        "response_fwhm_ghz": "inf", "noise_rate_cps": 0.0},
    "detectors": [{"efficiency": 1.0, "dark_rate_cps": 0.0}, {"efficiency": 1.0, "dark_rate_cps": 0.0}],
    "n_start_pulses": 2000,
    "delay_grid": {"start_ps": -40.0, "stop_ps": 40.0, "step_ps": 8.0},
    "rng_seed": 5,
}


@pytest.fixture
def ideal_file(tmp_path):
    path = tmp_path / "ideal.json"
    path.write_text(json.dumps(IDEAL))
    return path


def test_schema_command(capsys):
    assert main(["schema"]) == 0
    schema = json.loads(capsys.readouterr().out)
    assert "source" in schema["properties"]


def test_missing_scenario(tmp_path, capsys):
    assert main(["simulate", str(tmp_path / "absent.json")]) == 2
    assert "error" in capsys.readouterr().err


def test_schema_violation_prints_diagnostics(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"source": {"mean_pairs": 0.05}}))
    assert main(["budget", str(path)]) == 2
    assert "source.mean_pairs" in capsys.readouterr().err


def test_simulate_then_fit(ideal_file, tmp_path):
    out = tmp_path / "run"
    assert main(["simulate", str(ideal_file), "--out", str(out)]) == 0
    curve_path = tmp_path / "run_curve.csv"
    assert len(read_curve_csv(curve_path)) == 11
    assert main(["fit", str(curve_path), "--bandwidth", "25"]) == 0
    report = json.loads((tmp_path / "run_curve_fit.json").read_text())
    assert report["coherence"]["sigma_theory"] == pytest.approx(10.60, abs=0.005)


def test_seed_and_threads(ideal_file, tmp_path):
    assert main(["simulate", str(ideal_file), "--out", str(tmp_path / "a"), "--threads", "1"]) == 0
    assert main(["simulate", str(ideal_file), "--out", str(tmp_path / "b"), "--threads", "3"]) == 0
    assert main(["simulate", str(ideal_file), "--out", str(tmp_path / "c"), "--seed", "99"]) == 0
    a = (tmp_path / "a_curve.csv").read_bytes()
    assert a == (tmp_path / "b_curve.csv").read_bytes()
    assert a != (tmp_path / "c_curve.csv").read_bytes()


def test_pulse_cap_flag_and_environment(ideal_file, tmp_path, monkeypatch, capsys):
    assert main(["simulate", str(ideal_file), "--out", str(tmp_path / "cap"), "--pulse-cap", "1000"]) == 3
    assert "pulse-cap" in capsys.readouterr().err
    monkeypatch.setenv("HOMUPCONV_PULSE_CAP", "1000")
    assert main(["simulate", str(ideal_file), "--out", str(tmp_path / "env")]) == 3


def test_budget_prints_table(tmp_path, capsys):
    assert main(["budget", str(SCENARIOS / "reference_setup.json"), "--out", str(tmp_path / "reference")]) == 0
    out = capsys.readouterr().out
    assert "predicted visibility" in out
    assert (tmp_path / "reference_budget.json").exists()


def test_bundled_beating_scenario(tmp_path, capsys):
    assert main(["run", str(SCENARIOS / "beating.json"), "--out", str(tmp_path / "beat")]) == 0
    assert "beating_period_ps" in capsys.readouterr().out
    curve = read_curve_csv(tmp_path / "beat_analytic.csv")
    assert beating_period(curve) == pytest.approx(1.2547, abs=0.005)


def test_sweep_with_empty_values(ideal_file, tmp_path):
    args = ["sweep", str(ideal_file), "--out", str(tmp_path / "s"), "--parameter", "source.mean_pairs_per_pulse",
            "--values", ""]
    assert main(args) == 2


def test_sweep_from_the_command_line(ideal_file, tmp_path):
    args = ["sweep", str(ideal_file), "--out", str(tmp_path / "s"), "--parameter", "source.mean_pairs_per_pulse",
            "--values", "0.01,0.1"]
    assert main(args) == 0
    assert len((tmp_path / "s_sweep.csv").read_text().splitlines()) == 3


def test_fit_rejects_malformed_csv(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("delay_ps,coincidences\n0,1\n")
    assert main(["fit", str(path)]) == 2
    assert "row 1" in capsys.readouterr().err


def test_unknown_command_exits_with_usage_error():
    with pytest.raises(SystemExit) as info:
        main(["plot"])
    assert info.value.code == 2
