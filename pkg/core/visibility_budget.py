"""
Visibility Budget
Exact enumeration of converted photon numbers per pulse, predicting the dip depth and its limits
"""
import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, Iterator, Optional, Sequence, Tuple

import numpy as np

from .montecarlo import ExperimentConfig, PreparedExperiment, prepare_experiment
from .pair_source import pair_number_pmf
from .wavepacket import jitter_averaged_overlap_squared, overlap_sigma

logger = logging.getLogger(__name__)

MAX_PHOTONS_PER_CHANNEL = 3
TRUNCATION_WARNING = 1e-4
CATEGORIES = ("interfering", "multi_pair", "raman", "dark")


@dataclass(frozen=True)
class VisibilityBudget:
    """Per-pulse coincidence probabilities at far delay split by origin, and the predicted dip"""
    interfering: float
    multi_pair: float
    raman: float
    dark: float
    coincidence_far: float
    coincidence_zero: float
    start_far: float
    start_zero: float
    visibility: float
    dip_floor: float  # zero-delay counts relative to the far-delay baseline
    coincidences_per_start_far: float
    effective_sigma: float  # ps
    overlap_zero: float
    survival_signal: float
    survival_idler: float
    truncation_error: float
    truncation_warning: bool

    def fractions(self) -> Dict[str, float]:
        total = self.coincidence_far
        return {name: (getattr(self, name) / total if total > 0 else 0.0) for name in CATEGORIES}

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["fractions"] = self.fractions()
        return data

    def table(self) -> str:
        lines = [f"{'contribution':<14}{'P(coinc)/pulse':>18}{'fraction':>12}"]
        for name, fraction in self.fractions().items():
            lines.append(f"{name:<14}{getattr(self, name):>18.4e}{fraction:>12.4f}")
        lines.append(f"{'total':<14}{self.coincidence_far:>18.4e}{1.0:>12.4f}")
        lines.append("")
        lines.append(f"predicted visibility   {self.visibility:.4f}")
        lines.append(f"dip floor / baseline   {self.dip_floor:.4f}")
        lines.append(f"effective sigma        {self.effective_sigma:.3f} ps")
        lines.append(f"coincidences per start {self.coincidences_per_start_far:.4e}")
        if self.truncation_warning:
            lines.append(f"WARNING: truncation error {self.truncation_error:.2e} exceeds tolerance")
        return "\n".join(lines)


@dataclass(frozen=True)
class _Configuration:
    probability: float
    both: int
    signal_only: int
    idler_only: int
    raman_signal: int
    raman_idler: int

    @property
    def n_signal(self) -> int:
        return self.both + self.signal_only + self.raman_signal

    @property
    def n_idler(self) -> int:
        return self.both + self.idler_only + self.raman_idler

    @property
    def interfering(self) -> bool:
        return self.both == 1 and self.n_signal == 1 and self.n_idler == 1

    @property
    def category(self) -> str:
        if self.interfering:
            return "interfering"
        if self.raman_signal or self.raman_idler:
            return "raman"
        return "multi_pair"


def _configurations(prepared: PreparedExperiment) -> Iterator[_Configuration]:
    means = prepared.means
    counts = np.arange(MAX_PHOTONS_PER_CHANNEL + 1)
    pair_pmf = pair_number_pmf(counts, means.pair_mean, means.statistics)
    raman_signal_pmf = pair_number_pmf(counts, means.raman_signal, "poisson")
    raman_idler_pmf = pair_number_pmf(counts, means.raman_idler, "poisson")
    fractions = (means.fraction_both, means.fraction_signal_only, means.fraction_idler_only)

    for n in range(MAX_PHOTONS_PER_CHANNEL + 1):
        for both in range(n + 1):
            for signal_only in range(n - both + 1):
                idler_only = n - both - signal_only
                ways = math.factorial(n) // (math.factorial(both) * math.factorial(signal_only) * math.factorial(idler_only))
                split = (ways * fractions[0] ** both * fractions[1] ** signal_only * fractions[2] ** idler_only)
                p_pairs = pair_pmf[n] * split
                if p_pairs == 0:
                    continue
                for rs in counts:
                    for ri in counts:
                        probability = p_pairs * raman_signal_pmf[rs] * raman_idler_pmf[ri]
                        if probability > 0:
                            yield _Configuration(float(probability), both, signal_only, idler_only, int(rs), int(ri))


def _click_probabilities(prepared: PreparedExperiment, config: _Configuration, overlap2: np.ndarray,
                         with_darks: bool) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(P(click1), P(click2), P(click1 and click2)) for one photon-number configuration"""
    e1, e2 = prepared.efficiency
    d1, d2 = prepared.dark_probability if with_darks else (0.0, 0.0)
    if config.interfering:
        p_bunch = 0.5 * (1.0 + prepared.xi2 * overlap2)
        # split (1, 1); bunched into detector 1 (2, 0); bunched into detector 2 (0, 2)
        no1 = (1.0 - p_bunch) * (1.0 - e1) + 0.5 * p_bunch * (1.0 - e1) ** 2 + 0.5 * p_bunch
        no2 = (1.0 - p_bunch) * (1.0 - e2) + 0.5 * p_bunch * (1.0 - e2) ** 2 + 0.5 * p_bunch
        none = (1.0 - p_bunch) * (1.0 - e1) * (1.0 - e2) + 0.5 * p_bunch * ((1.0 - e1) ** 2 + (1.0 - e2) ** 2)
    else:
        n = config.n_signal + config.n_idler
        no1 = np.full_like(overlap2, (1.0 - 0.5 * e1) ** n)
        no2 = np.full_like(overlap2, (1.0 - 0.5 * e2) ** n)
        none = np.full_like(overlap2, (1.0 - 0.5 * (e1 + e2)) ** n)
    no1 = no1 * (1.0 - d1)
    no2 = no2 * (1.0 - d2)
    none = none * (1.0 - d1) * (1.0 - d2)
    return 1.0 - no1, 1.0 - no2, 1.0 - no1 - no2 + none


def _enumerate(prepared: PreparedExperiment, overlap2: np.ndarray) -> Dict[str, Any]:
    overlap2 = np.asarray(overlap2, dtype=float)
    parts = {name: np.zeros_like(overlap2) for name in CATEGORIES}
    starts = np.zeros_like(overlap2)
    covered = 0.0
    for config in _configurations(prepared):
        covered += config.probability
        click1, click2, both = _click_probabilities(prepared, config, overlap2, with_darks=True)
        _, _, both_photons = _click_probabilities(prepared, config, overlap2, with_darks=False)
        parts[config.category] += config.probability * both_photons
        parts["dark"] += config.probability * (both - both_photons)
        starts += config.probability * (click2 if prepared.start_index else click1)
    # pulses beyond the enumerated photon numbers are treated as never clicking
    return {"parts": parts, "coincidence": sum(parts.values()), "start": starts, "missing": max(0.0, 1.0 - covered)}


def _effective_overlap(prepared: PreparedExperiment, delays) -> np.ndarray:
    return jitter_averaged_overlap_squared(prepared.signal.wavepacket, prepared.idler.wavepacket,
                                           delays, prepared.relative_jitter)


def visibility_budget(config: ExperimentConfig) -> VisibilityBudget:
    """
    Predict the dip from the exact per-pulse photon-number law

    Every combination of up to three converted photons per channel (pairs split by which
    photons survived, Raman photons on each side) contributes its exact coincidence and
    start probability, darks included.
    """
    prepared = prepare_experiment(config)
    overlap_zero = float(_effective_overlap(prepared, 0.0))
    result = _enumerate(prepared, np.array([0.0, overlap_zero]))
    far, zero = result["coincidence"]
    start_far, start_zero = result["start"]

    ratio_far = far / start_far if start_far > 0 else 0.0
    ratio_zero = zero / start_zero if start_zero > 0 else 0.0
    visibility = (ratio_far - ratio_zero) / ratio_far if ratio_far > 0 else 0.0

    truncation_error = result["missing"]
    warn = far > 0 and truncation_error > TRUNCATION_WARNING * far
    if warn:
        logger.warning("photon-number truncation leaves %.2e of the probability mass, above %.0e of the "
                       "coincidence probability", truncation_error, TRUNCATION_WARNING)

    sigma = overlap_sigma(prepared.signal.wavepacket, prepared.idler.wavepacket)
    parts = {name: float(values[0]) for name, values in result["parts"].items()}
    return VisibilityBudget(
        **parts,
        coincidence_far=float(far),
        coincidence_zero=float(zero),
        start_far=float(start_far),
        start_zero=float(start_zero),
        visibility=float(visibility),
        dip_floor=float(ratio_zero / ratio_far) if ratio_far > 0 else 0.0,
        coincidences_per_start_far=float(ratio_far),
        effective_sigma=math.sqrt(sigma ** 2 + prepared.relative_jitter ** 2),
        overlap_zero=overlap_zero,
        survival_signal=prepared.signal.survival_probability,
        survival_idler=prepared.idler.survival_probability,
        truncation_error=float(truncation_error),
        truncation_warning=bool(warn),
    )


def expected_curve(config: ExperimentConfig, delays: Optional[Sequence[float]] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Expected coincidences per n_start_pulses starts at each delay"""
    prepared = prepare_experiment(config)
    delays = np.asarray(config.delays if delays is None else delays, dtype=float)
    result = _enumerate(prepared, _effective_overlap(prepared, delays))
    return delays, config.n_start_pulses * result["coincidence"] / result["start"]


def per_pulse_probabilities(config: ExperimentConfig, delay: float) -> Dict[str, float]:
    """Exact per-pulse coincidence and start probabilities at one delay"""
    prepared = prepare_experiment(config)
    result = _enumerate(prepared, np.array([float(_effective_overlap(prepared, delay))]))
    return {"coincidence": float(result["coincidence"][0]), "start": float(result["start"][0]),
            "truncation_error": result["missing"]}
