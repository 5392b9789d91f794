"""
Test the shared experiment engine: status dictionaries, output files and exit codes
"""
import json
import math
import os
import sys

import pytest

# Add the project root to Python path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from core.reports import read_curve_csv
from core.scenario import parse_scenario
from core.wavepacket import coherence_sigma_from_bandwidth
from shared.hom_engine import EXIT_INPUT, EXIT_OK, EXIT_RUNTIME, HOMExperimentEngine

SCENARIOS = os.path.join(os.path.dirname(os.path.abspath(__file__)), "scenarios")


def ideal_scenario(prefix, **overrides):
    data = {
        "output_prefix": str(prefix),
        "source": {"mean_pairs_per_pulse": 0.05, "raman_mean_signal": 0.0, "raman_mean_idler": 0.0},
        "converter_signal": {"pump_frequency_thz": 226.477, "peak_efficiency": 1.0, "response_center_thz": 193.676,
                             "response_fwhm_ghz": math.inf, "noise_rate_cps": 0.0},
        "converter_idler": {"pump_frequency_thz": 227.274, "peak_efficiency": 1.0, "response_center_thz": 192.879,
                            "response_fwhm_ghz": math.inf, "noise_rate_cps": 0.0},
        "detectors": [{"efficiency": 1.0, "dark_rate_cps": 0.0}, {"efficiency": 1.0, "dark_rate_cps": 0.0}],
        "n_start_pulses": 2000,
        "delay_grid": {"start_ps": -40.0, "stop_ps": 40.0, "step_ps": 8.0},
        "rng_seed": 5,
    }
    data.update(overrides)
    return parse_scenario(data)


@pytest.fixture
def engine():
    return HOMExperimentEngine()


def test_analytic_converted_photons(engine, tmp_path):
    scenario = parse_scenario({"mode": "analytic", "output_prefix": str(tmp_path / "conv")})
    result = engine.analytic(scenario)
    assert result["status"] == "success"
    assert result["exit_code"] == EXIT_OK
    summary = result["summary"]
    assert summary["V"] == pytest.approx(1.0, abs=1e-9)
    assert summary["p_after"] == pytest.approx(0.0, abs=1e-9)
    assert summary["p_before"] == pytest.approx(0.5, abs=1e-9)
    assert summary["sigma_ps"] == pytest.approx(12.5, abs=0.1)
    assert summary["survival_signal"] == pytest.approx(0.01696, abs=2e-5)
    assert all(os.path.exists(p) for p in result["files"])
    assert json.loads((tmp_path / "conv_analytic.json").read_text())["generator"] == "separable"


def test_analytic_model_curve(engine, tmp_path):
    scenario = parse_scenario({"mode": "analytic", "output_prefix": str(tmp_path / "model"),
                               "analytic": {"generator": "model",
                                            "model": {"C": 100.0, "V": 0.732, "sigma_ps": 9.5}}})
    result = engine.analytic(scenario)
    assert result["summary"]["V"] == 0.732
    curve = read_curve_csv(tmp_path / "model_analytic.csv")
    delays, values = curve.as_arrays()
    assert values[list(delays).index(0.0)] == pytest.approx(26.8)


def test_analytic_beating(engine, tmp_path):
    scenario = parse_scenario({"mode": "analytic", "output_prefix": str(tmp_path / "beat"),
                               "delay_grid": {"start_ps": -2.0, "stop_ps": 2.0, "step_ps": 0.01},
                               "analytic": {"generator": "joint"}})
    summary = engine.analytic(scenario)["summary"]
    assert summary["beating_period_ps"] == pytest.approx(1.2547, abs=0.01)
    assert summary["beat_frequency_ghz"] == pytest.approx(797.0, rel=0.01)
    assert summary["p_min"] == pytest.approx(0.0, abs=1e-3)


def test_analytic_beating_needs_two_minima(engine, tmp_path):
    scenario = parse_scenario({"mode": "analytic", "output_prefix": str(tmp_path / "short"),
                               "delay_grid": {"start_ps": -0.5, "stop_ps": 0.5, "step_ps": 0.01},
                               "analytic": {"generator": "joint"}})
    result = engine.analytic(scenario)
    assert result["status"] == "success"
    assert result["summary"]["beating_period_ps"] is None


def test_analytic_curve_fits_back_to_coherence_sigma(engine, tmp_path):
    scenario = parse_scenario({
        "mode": "analytic", "output_prefix": str(tmp_path / "degenerate"),
        "source": {"signal_center_thz": 193.676, "idler_center_thz": 193.676},
        "delay_grid": {"start_ps": -40.0, "stop_ps": 40.0, "step_ps": 1.0},
        "analytic": {"generator": "separable", "converted": False},
    })
    assert engine.analytic(scenario)["status"] == "success"
    fit = engine.fit(str(tmp_path / "degenerate_analytic.csv"), str(tmp_path / "degenerate"), bandwidth_ghz=25.0)
    assert fit["exit_code"] == EXIT_OK
    assert fit["summary"]["sigma_ps"] == pytest.approx(coherence_sigma_from_bandwidth(25.0), rel=1e-4)
    assert fit["summary"]["V"] == pytest.approx(1.0, abs=1e-6)
    assert fit["summary"]["coherence"]["sigma_theory"] == pytest.approx(10.60, abs=0.005)
    assert (tmp_path / "degenerate_fit.txt").exists()


def test_simulate_writes_curve_and_metadata(engine, tmp_path):
    steps = []
    engine.set_progress_callback(lambda step, message, percent: steps.append(percent))
    result = engine.simulate(ideal_scenario(tmp_path / "ideal"))
    assert result["status"] == "success"
    assert result["summary"]["points"] == 11
    assert steps[-1] == 100
    curve = read_curve_csv(tmp_path / "ideal_curve.csv")
    assert list(curve.starts) == [2000] * 11
    meta = json.loads((tmp_path / "ideal_curve_meta.json").read_text())
    assert meta["config_digest"] == result["summary"]["config_digest"]
    assert meta["rng_seed"] == 5


def test_simulate_is_reproducible_across_threads(tmp_path):
    HOMExperimentEngine(threads=1).simulate(ideal_scenario(tmp_path / "one"))
    HOMExperimentEngine(threads=3).simulate(ideal_scenario(tmp_path / "three"))
    assert (tmp_path / "one_curve.csv").read_bytes() == (tmp_path / "three_curve.csv").read_bytes()


def test_simulate_pulse_cap_keeps_partial_curve(engine, tmp_path):
    result = engine.simulate(ideal_scenario(tmp_path / "capped", pulse_cap=1000))
    assert result["status"] == "error"
    assert result["exit_code"] == EXIT_RUNTIME
    assert result["partial"] is True
    assert (tmp_path / "capped_curve.csv").exists()
    meta = json.loads((tmp_path / "capped_curve_meta.json").read_text())
    assert meta["partial"] is True


def test_simulate_with_blind_start_detector(engine, tmp_path):
    scenario = ideal_scenario(tmp_path / "blind", detectors=[{"efficiency": 0.0, "dark_rate_cps": 0.0},
                                                             {"efficiency": 1.0, "dark_rate_cps": 0.0}])
    result = engine.simulate(scenario)
    assert result["exit_code"] == EXIT_RUNTIME
    assert result["files"] == []


def test_run_dispatches_on_mode(engine, tmp_path):
    simulated = engine.run(ideal_scenario(tmp_path / "dispatch"))
    assert simulated["summary"]["points"] == 11
    fitted = engine.run(ideal_scenario(tmp_path / "dispatch", mode="fit"))
    assert fitted["status"] == "success"
    assert (tmp_path / "dispatch_fit.json").exists()
    budget = engine.run(ideal_scenario(tmp_path / "dispatch", mode="budget"))
    assert "predicted visibility" in budget["text"]


def test_fit_errors_map_to_exit_codes(engine, tmp_path):
    missing = engine.fit(str(tmp_path / "absent.csv"), str(tmp_path / "absent"))
    assert missing["exit_code"] == EXIT_INPUT

    bad = tmp_path / "bad.csv"
    bad.write_text("delay_ps,coincidences,starts\n0,12,100\n4,x,100\n")
    malformed = engine.fit(str(bad), str(tmp_path / "bad"))
    assert malformed["exit_code"] == EXIT_INPUT
    assert malformed["row"] == 3

    short = tmp_path / "short.csv"
    short.write_text("delay_ps,coincidences,starts\n-4,100,10\n0,20,10\n4,100,10\n")
    too_few = engine.fit(str(short), str(tmp_path / "short"))
    assert too_few["exit_code"] == EXIT_RUNTIME


def test_fit_with_bootstrap(engine, tmp_path):
    engine.simulate(ideal_scenario(tmp_path / "boot"))
    result = engine.fit(str(tmp_path / "boot_curve.csv"), str(tmp_path / "boot"), bootstrap=20, seed=3)
    assert result["status"] == "success"
    assert result["summary"]["bootstrap"]["replicas"] <= 20
    assert "bootstrap V_err" in result["text"]


def test_budget_report(engine, tmp_path):
    result = engine.budget(parse_scenario({"output_prefix": str(tmp_path / "reference")}))
    assert result["exit_code"] == EXIT_OK
    assert result["summary"]["visibility"] == pytest.approx(0.705, abs=0.02)
    assert (tmp_path / "reference_budget.txt").read_text().startswith("contribution")


def test_sweep_rows(engine, tmp_path):
    result = engine.sweep(ideal_scenario(tmp_path / "sweep"), "source.mean_pairs_per_pulse", [0.01, 0.1])
    assert result["status"] == "success"
    rows = result["rows"]
    assert [row[0] for row in rows] == [0.01, 0.1]
    assert rows[0][5] > rows[1][5]
    lines = (tmp_path / "sweep_sweep.csv").read_text().splitlines()
    assert lines[0] == "value,V_fit,V_fit_err,sigma_fit_ps,sigma_fit_err_ps,V_budget"
    assert len(lines) == 3


def test_sweep_uses_scenario_settings(engine, tmp_path):
    scenario = ideal_scenario(tmp_path / "own", sweep={"parameter": "detectors.0.efficiency", "values": [0.5]})
    result = engine.sweep(scenario)
    assert result["summary"] == {"parameter": "detectors.0.efficiency", "rows": 1}


@pytest.mark.parametrize("parameter,values", [
    ("source.mean_pairs_per_pulse", []),
    (None, [0.1]),
    ("source.mu", [0.1]),
    ("source.mean_pairs_per_pulse", [-1.0]),
])
def test_sweep_input_errors(engine, tmp_path, parameter, values):
    result = engine.sweep(ideal_scenario(tmp_path / "bad"), parameter, values)
    assert result["status"] == "error"
    assert result["exit_code"] == EXIT_INPUT
    assert result["suggestions"]


def reference_scenario(prefix):
    with open(os.path.join(SCENARIOS, "reference_setup.json"), encoding="utf-8") as f:
        data = json.load(f)
    data["output_prefix"] = str(prefix)
    return parse_scenario(data)


@pytest.mark.slow
def test_mean_pair_sweep_agrees_with_budget(tmp_path):
    scenario = reference_scenario(tmp_path / "mu")
    result = HOMExperimentEngine(threads=4).sweep(scenario)
    assert result["exit_code"] == EXIT_OK
    rows = result["rows"]
    assert [row[0] for row in rows] == [0.01, 0.05, 0.2]
    for value, v_fit, v_err, sigma, sigma_err, v_budget in rows:
        assert v_fit == pytest.approx(v_budget, abs=0.05)
    for lower, higher in zip(rows, rows[1:]):
        assert lower[1] - higher[1] > 3.0 * math.hypot(lower[2], higher[2])


@pytest.mark.slow
def test_timing_jitter_sweep_lowers_visibility(tmp_path):
    scenario = reference_scenario(tmp_path / "jitter")
    result = HOMExperimentEngine(threads=4).sweep(scenario, "source.timing_jitter_sigma_ps", [0.0, 5.0, 20.0])
    assert result["exit_code"] == EXIT_OK
    rows = result["rows"]
    budgets = [row[5] for row in rows]
    assert budgets[0] > budgets[1] > budgets[2]
    for lower, higher in zip(rows, rows[1:]):
        assert higher[1] < lower[1] + 3.0 * math.hypot(lower[2], higher[2])
    assert rows[0][1] - rows[2][1] > 3.0 * math.hypot(rows[0][2], rows[2][2])
