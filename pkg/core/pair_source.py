"""
SFWM Pair Source
Per-pulse photon-pair statistics, channel wavepackets, Raman singles and timing jitter
"""
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np
from scipy.stats import geom, poisson

from .errors import DomainError
from .units import GAUSSIAN_TBP, wavelength_nm_to_thz
from .wavepacket import JointSpectralAmplitude, SpectralWavepacket

PAIR_STATISTICS = ("poisson", "thermal")


@dataclass(frozen=True)
class SourceSpec:
    """Fiber SFWM source followed by the signal/idler channel filters"""
    pump_wavelength: float = 1551.1  # nm
    pump_pulse_fwhm: float = 100.0  # ps
    mean_pairs_per_pulse: float = 0.05
    signal_center: float = 193.676  # THz
    idler_center: float = 192.879  # THz
    channel_fwhm: float = 25.0  # GHz
    raman_mean_signal: Optional[float] = None  # photons/pulse, defaults to mean_pairs_per_pulse
    raman_mean_idler: Optional[float] = None
    timing_jitter_sigma: float = 0.0  # ps, per photon
    pair_statistics: str = "poisson"

    def __post_init__(self):
        if self.raman_mean_signal is None:
            object.__setattr__(self, "raman_mean_signal", self.mean_pairs_per_pulse)
        if self.raman_mean_idler is None:
            object.__setattr__(self, "raman_mean_idler", self.mean_pairs_per_pulse)
        for name in ("mean_pairs_per_pulse", "raman_mean_signal", "raman_mean_idler", "timing_jitter_sigma"):
            value = getattr(self, name)
            if not (value >= 0) or not math.isfinite(value):
                raise DomainError(f"{name} must be a finite non-negative number, got {value!r}")
        for name in ("pump_wavelength", "pump_pulse_fwhm", "signal_center", "idler_center", "channel_fwhm"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if self.pair_statistics not in PAIR_STATISTICS:
            raise DomainError(f"pair_statistics must be one of {PAIR_STATISTICS}, got {self.pair_statistics!r}")


@dataclass(frozen=True)
class PulseEmission:
    """Photons leaving the source channels on one pump pulse"""
    n_pairs: int
    n_raman_signal: int
    n_raman_idler: int
    jitter_offset_signal: float = 0.0  # ps
    jitter_offset_idler: float = 0.0  # ps

    def __post_init__(self):
        if min(self.n_pairs, self.n_raman_signal, self.n_raman_idler) < 0:
            raise DomainError("photon counts must be non-negative")


class SurvivingMeans(NamedTuple):
    """
    Photon-number means after both converters

    Only pairs with at least one converted photon matter downstream; they arrive
    with mean pair_mean and split into both/signal-only/idler-only by the fractions.
    """
    pair_mean: float
    fraction_both: float
    fraction_signal_only: float
    fraction_idler_only: float
    raman_signal: float
    raman_idler: float
    statistics: str


def pump_frequency(spec: SourceSpec) -> float:
    """SFWM pump frequency in THz"""
    return wavelength_nm_to_thz(spec.pump_wavelength)


def sample_pair_numbers(spec: SourceSpec, rng: np.random.Generator, size=None):
    """Pair numbers per pulse under the configured statistics"""
    mu = spec.mean_pairs_per_pulse
    if mu == 0:
        return 0 if size is None else np.zeros(size, dtype=np.int64)
    if spec.pair_statistics == "thermal":
        return rng.geometric(1.0 / (1.0 + mu), size=size) - 1
    return rng.poisson(mu, size=size)


def sample_emission(spec: SourceSpec, rng: np.random.Generator) -> PulseEmission:
    n_pairs = int(sample_pair_numbers(spec, rng))
    n_raman_signal = int(rng.poisson(spec.raman_mean_signal)) if spec.raman_mean_signal > 0 else 0
    n_raman_idler = int(rng.poisson(spec.raman_mean_idler)) if spec.raman_mean_idler > 0 else 0
    if spec.timing_jitter_sigma > 0:
        jitter_signal, jitter_idler = (float(v) for v in rng.normal(0.0, spec.timing_jitter_sigma, size=2))
    else:
        jitter_signal = jitter_idler = 0.0
    return PulseEmission(n_pairs, n_raman_signal, n_raman_idler, jitter_signal, jitter_idler)


def emitted_wavepackets(spec: SourceSpec) -> Tuple[SpectralWavepacket, SpectralWavepacket]:
    """Signal and idler photons as transmitted by their channel filters"""
    return (SpectralWavepacket(spec.signal_center, spec.channel_fwhm),
            SpectralWavepacket(spec.idler_center, spec.channel_fwhm))


def anticorrelated_jsa(spec: SourceSpec, delay: float = 0.0) -> JointSpectralAmplitude:
    """
    Frequency-anticorrelated pair state

    The sum frequency is pinned by the transform-limited pump pulse; each lobe of the
    difference distribution is as wide as the convolution of two channel filters.
    """
    sum_bandwidth_ghz = GAUSSIAN_TBP / spec.pump_pulse_fwhm * 1e3
    return JointSpectralAmplitude.anticorrelated(
        sum_center=spec.signal_center + spec.idler_center,
        sum_bandwidth=sum_bandwidth_ghz,
        difference_center=(spec.signal_center - spec.idler_center) * 1e3,
        difference_bandwidth=math.sqrt(2.0) * spec.channel_fwhm,
        delay=delay,
    )


def surviving_channel_means(spec: SourceSpec, survival_signal: float, survival_idler: float) -> SurvivingMeans:
    """Thin the source's photon numbers by the converter survival probabilities"""
    q = 1.0 - (1.0 - survival_signal) * (1.0 - survival_idler)
    if q > 0:
        both = survival_signal * survival_idler / q
        signal_only = survival_signal * (1.0 - survival_idler) / q
        idler_only = (1.0 - survival_signal) * survival_idler / q
    else:
        both = signal_only = idler_only = 0.0
    return SurvivingMeans(
        pair_mean=spec.mean_pairs_per_pulse * q,
        fraction_both=both,
        fraction_signal_only=signal_only,
        fraction_idler_only=idler_only,
        raman_signal=spec.raman_mean_signal * survival_signal,
        raman_idler=spec.raman_mean_idler * survival_idler,
        statistics=spec.pair_statistics,
    )


def pair_number_pmf(n: np.ndarray, mean: float, statistics: str) -> np.ndarray:
    """P(n) of the pair-number distribution with the given mean"""
    n = np.asarray(n)
    if mean == 0:
        return (n == 0).astype(float)
    if statistics == "thermal":
        return geom.pmf(n + 1, 1.0 / (1.0 + mean))
    return poisson.pmf(n, mean)
