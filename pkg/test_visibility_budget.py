"""
Test the exact photon-number visibility budget
"""
import math
from dataclasses import replace

import numpy as np
import pytest

from core.montecarlo import DetectorSpec, ExperimentConfig, default_idler_converter, default_signal_converter
from core.pair_source import SourceSpec
from core.visibility_budget import CATEGORIES, expected_curve, per_pulse_probabilities, visibility_budget

PERFECT_DETECTORS = (DetectorSpec(efficiency=1.0, dark_rate=0.0), DetectorSpec(efficiency=1.0, dark_rate=0.0))


def noise_free_config(mu: float = 0.001, **overrides) -> ExperimentConfig:
    settings = dict(
        source=SourceSpec(mean_pairs_per_pulse=mu, raman_mean_signal=0.0, raman_mean_idler=0.0),
        converter_signal=replace(default_signal_converter(), peak_efficiency=1.0, response_fwhm=math.inf,
                                 noise_rate=0.0),
        converter_idler=replace(default_idler_converter(), peak_efficiency=1.0, response_fwhm=math.inf,
                                noise_rate=0.0),
        detectors=PERFECT_DETECTORS,
    )
    settings.update(overrides)
    return ExperimentConfig(**settings)


def test_noise_free_visibility_approaches_one():
    budget = visibility_budget(noise_free_config())
    assert budget.visibility > 0.99
    assert budget.dark == 0.0
    assert budget.raman == 0.0
    assert budget.fractions()["interfering"] > 0.99
    assert not budget.truncation_warning


def test_lower_pair_rate_raises_visibility():
    visibilities = [visibility_budget(noise_free_config(mu)).visibility for mu in (0.0001, 0.001, 0.01)]
    assert visibilities[0] > visibilities[1] > visibilities[2]
    assert visibilities[0] == pytest.approx(1.0, abs=1e-3)


def test_default_settings():
    budget = visibility_budget(ExperimentConfig())
    assert budget.visibility == pytest.approx(0.705, abs=0.02)
    assert budget.survival_signal == pytest.approx(0.01696, abs=2e-5)
    assert budget.effective_sigma == pytest.approx(12.5, abs=0.1)
    assert budget.overlap_zero == pytest.approx(1.0, abs=1e-9)
    assert not budget.truncation_warning


@pytest.mark.parametrize("mu", [0.01, 0.05, 0.2])
def test_fractions_sum_to_one(mu):
    budget = visibility_budget(ExperimentConfig(source=SourceSpec(mean_pairs_per_pulse=mu)))
    fractions = budget.fractions()
    assert set(fractions) == set(CATEGORIES)
    assert sum(fractions.values()) == pytest.approx(1.0, abs=1e-12)
    assert all(f >= 0 for f in fractions.values())


def test_visibility_falls_with_pair_rate():
    visibilities = [visibility_budget(ExperimentConfig(source=SourceSpec(mean_pairs_per_pulse=mu))).visibility
                    for mu in (0.01, 0.05, 0.2)]
    assert visibilities[0] > visibilities[1] > visibilities[2]


def test_distinguishable_photons_give_no_dip():
    budget = visibility_budget(noise_free_config(distinguishability_overlap=0.0))
    assert budget.visibility == pytest.approx(0.0, abs=1e-12)
    assert budget.dip_floor == pytest.approx(1.0, abs=1e-12)


def test_truncation_warning_at_high_pair_rate(caplog):
    budget = visibility_budget(noise_free_config(mu=2.0))
    assert budget.truncation_warning
    assert budget.truncation_error > 0.1
    assert "truncation" in caplog.text
    assert "WARNING" in budget.table()


def test_expected_curve_shape():
    config = ExperimentConfig(n_start_pulses=500_000)
    budget = visibility_budget(config)
    delays, expected = expected_curve(config, [-200.0, -10.0, 0.0, 10.0, 200.0])
    np.testing.assert_array_equal(delays, [-200.0, -10.0, 0.0, 10.0, 200.0])
    assert expected[0] == pytest.approx(expected[-1], rel=1e-12)
    assert expected[1] == pytest.approx(expected[3], rel=1e-12)
    assert int(np.argmin(expected)) == 2
    assert expected[0] == pytest.approx(500_000 * budget.coincidences_per_start_far, rel=1e-9)
    assert expected[2] / expected[0] == pytest.approx(budget.dip_floor, rel=1e-9)


def test_expected_curve_defaults_to_config_delays():
    config = ExperimentConfig(delays=(-8.0, 0.0, 8.0))
    delays, expected = expected_curve(config)
    np.testing.assert_array_equal(delays, [-8.0, 0.0, 8.0])
    assert expected.shape == (3,)


def test_per_pulse_probabilities():
    config = ExperimentConfig()
    far = per_pulse_probabilities(config, 500.0)
    zero = per_pulse_probabilities(config, 0.0)
    assert 0 < zero["coincidence"] < far["coincidence"] < far["start"] < 1
    assert far["truncation_error"] >= 0


def test_budget_serializes():
    data = visibility_budget(ExperimentConfig()).to_dict()
    assert set(CATEGORIES) <= set(data)
    assert sum(data["fractions"].values()) == pytest.approx(1.0)
    assert "predicted visibility" in visibility_budget(ExperimentConfig()).table()
