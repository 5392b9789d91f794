"""
Monte Carlo Coincidence Experiment
Pulse-by-pulse simulation of source, up-converters, 50/50 coupler, detectors and start/stop counting
"""
import hashlib
import json
import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import poisson

from .errors import DomainError, PulseCapExceeded
from .hom import validate_delays
from .pair_source import (
    PulseEmission,
    SourceSpec,
    SurvivingMeans,
    emitted_wavepackets,
    sample_emission,
    surviving_channel_means,
)
from .sfg_converter import ConversionOutcome, ConverterSpec, convert_wavepacket
from .units import MHZ, NS
from .wavepacket import overlap_squared

logger = logging.getLogger(__name__)

DEFAULT_PULSE_CAP = 10 ** 10
DEFAULT_DELAYS = tuple(float(d) for d in range(-40, 41, 4))
# Active (non-empty) pulses drawn per vectorized batch
BATCH_SIZE = 1 << 16


@dataclass(frozen=True)
class DetectorSpec:
    """Si single-photon counting module"""
    efficiency: float = 0.6
    dark_rate: float = 100.0  # cps

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise DomainError(f"detector efficiency must be in [0, 1], got {self.efficiency}")
        if not self.dark_rate >= 0:
            raise DomainError(f"dark_rate must be non-negative, got {self.dark_rate}")


@dataclass(frozen=True)
class TiaSpec:
    """Time interval analyzer fed by the two detectors"""
    coincidence_window: float = 1.0  # ns
    start_detector: int = 1

    def __post_init__(self):
        if not self.coincidence_window > 0:
            raise DomainError(f"coincidence_window must be positive, got {self.coincidence_window}")
        if self.start_detector not in (1, 2):
            raise DomainError(f"start_detector must be 1 or 2, got {self.start_detector}")


def default_signal_converter() -> ConverterSpec:
    return ConverterSpec(pump_frequency=226.477, peak_efficiency=0.02, response_center=193.676,
                         response_fwhm=40.0, noise_rate=1900.0, pump_power_mw=4.9)


def default_idler_converter() -> ConverterSpec:
    return ConverterSpec(pump_frequency=227.274, peak_efficiency=0.02, response_center=192.879,
                         response_fwhm=40.0, noise_rate=1900.0, pump_power_mw=12.8)


@dataclass(frozen=True)
class ExperimentConfig:
    source: SourceSpec = field(default_factory=SourceSpec)
    converter_signal: ConverterSpec = field(default_factory=default_signal_converter)
    converter_idler: ConverterSpec = field(default_factory=default_idler_converter)
    detectors: Tuple[DetectorSpec, DetectorSpec] = (DetectorSpec(), DetectorSpec())
    tia: TiaSpec = field(default_factory=TiaSpec)
    repetition_rate: float = 100.0  # MHz
    n_start_pulses: int = 500_000
    delays: Tuple[float, ...] = DEFAULT_DELAYS  # ps, applied to the idler arm
    rng_seed: int = 42
    distinguishability_overlap: float = 1.0
    pulse_cap: int = DEFAULT_PULSE_CAP

    def __post_init__(self):
        if not self.repetition_rate > 0:
            raise DomainError(f"repetition_rate must be positive, got {self.repetition_rate}")
        if not self.n_start_pulses > 0:
            raise DomainError(f"n_start_pulses must be positive, got {self.n_start_pulses}")
        if len(self.detectors) != 2:
            raise DomainError("exactly two detectors are required")
        if not 0.0 <= self.distinguishability_overlap <= 1.0:
            raise DomainError("distinguishability_overlap must be in [0, 1]")
        if not self.pulse_cap > 0:
            raise DomainError("pulse_cap must be positive")
        object.__setattr__(self, "delays", tuple(float(d) for d in validate_delays(self.delays)))
        object.__setattr__(self, "detectors", tuple(self.detectors))


def config_digest(config: ExperimentConfig) -> str:
    """SHA-256 of the canonical JSON form of the configuration"""
    canonical = json.dumps(asdict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class CurvePoint:
    delay: float  # ps
    coincidences: float  # raw counts (expectation values for synthetic curves)
    starts: int


@dataclass
class DipCurve:
    """Coincidence counts versus delay, with the start totals per point"""
    points: List[CurvePoint]
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.points:
            raise DomainError("a dip curve needs at least one point")
        for point in self.points:
            if point.coincidences < 0:
                raise DomainError(f"negative coincidence count at {point.delay} ps")
            if point.starts <= 0:
                raise DomainError(f"start count must be positive at {point.delay} ps")
        delays = [p.delay for p in self.points]
        if any(b <= a for a, b in zip(delays, delays[1:])):
            raise DomainError("curve delays must be strictly increasing")

    @property
    def delays(self) -> np.ndarray:
        return np.array([p.delay for p in self.points], dtype=float)

    @property
    def coincidences(self) -> np.ndarray:
        return np.array([p.coincidences for p in self.points], dtype=float)

    @property
    def starts(self) -> np.ndarray:
        return np.array([p.starts for p in self.points], dtype=np.int64)

    def as_arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.delays, self.coincidences

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class PreparedExperiment:
    """Per-configuration quantities shared by every pulse"""
    signal: ConversionOutcome
    idler: ConversionOutcome
    means: SurvivingMeans
    efficiency: Tuple[float, float]
    dark_probability: Tuple[float, float]
    xi2: float
    relative_jitter: float  # ps, rms of the idler-minus-signal arrival offset
    start_index: int

    def overlap2(self, delays) -> np.ndarray:
        return overlap_squared(self.signal.wavepacket, self.idler.wavepacket, delays)


def prepare_experiment(config: ExperimentConfig) -> PreparedExperiment:
    signal_wp, idler_wp = emitted_wavepackets(config.source)
    signal = convert_wavepacket(config.converter_signal, signal_wp)
    idler = convert_wavepacket(config.converter_idler, idler_wp)
    means = surviving_channel_means(config.source, signal.survival_probability, idler.survival_probability)

    pulse_rate = config.repetition_rate * MHZ
    if config.tia.coincidence_window * NS >= 1.0 / pulse_rate:
        logger.warning("coincidence window %.3g ns spans more than one pulse period; "
                       "only same-pulse coincidences are counted", config.tia.coincidence_window)
    # converter noise is split evenly over the two detector paths
    noise_per_path = 0.5 * (config.converter_signal.noise_rate + config.converter_idler.noise_rate)
    dark = tuple(min(1.0, (det.dark_rate + noise_per_path) / pulse_rate) for det in config.detectors)
    return PreparedExperiment(
        signal=signal,
        idler=idler,
        means=means,
        efficiency=(config.detectors[0].efficiency, config.detectors[1].efficiency),
        dark_probability=dark,
        xi2=config.distinguishability_overlap ** 2,
        relative_jitter=math.sqrt(2.0) * config.source.timing_jitter_sigma,
        start_index=config.tia.start_detector - 1,
    )


def _detect(rng: np.random.Generator, photons: int, efficiency: float, dark_probability: float) -> bool:
    detected = photons > 0 and rng.random() < 1.0 - (1.0 - efficiency) ** photons
    dark = rng.random() < dark_probability
    return bool(detected or dark)


def simulate_pulse(config: ExperimentConfig, delay: float, rng: np.random.Generator,
                   emission: Optional[PulseEmission] = None,
                   prepared: Optional[PreparedExperiment] = None) -> Tuple[bool, bool]:
    """
    One pump pulse through the whole apparatus

    Exactly one converted photon per coupler input from the same pair interferes; every other
    photon pattern is routed classically, each photon 50/50.
    """
    prepared = prepared or prepare_experiment(config)
    if emission is None:
        emission = sample_emission(config.source, rng)
    s_sig = prepared.signal.survival_probability
    s_idl = prepared.idler.survival_probability

    pair_signal = rng.random(emission.n_pairs) < s_sig
    pair_idler = rng.random(emission.n_pairs) < s_idl
    both = int(np.count_nonzero(pair_signal & pair_idler))
    n_signal = int(np.count_nonzero(pair_signal)) + int(rng.binomial(emission.n_raman_signal, s_sig))
    n_idler = int(np.count_nonzero(pair_idler)) + int(rng.binomial(emission.n_raman_idler, s_idl))

    if both == 1 and n_signal == 1 and n_idler == 1:
        tau = delay + emission.jitter_offset_idler - emission.jitter_offset_signal
        p_bunch = 0.5 * (1.0 + prepared.xi2 * float(prepared.overlap2(tau)))
        if rng.random() < p_bunch:
            photons = (2, 0) if rng.random() < 0.5 else (0, 2)
        else:
            photons = (1, 1)
    else:
        total = n_signal + n_idler
        first = int(rng.binomial(total, 0.5)) if total else 0
        photons = (first, total - first)

    click1 = _detect(rng, photons[0], prepared.efficiency[0], prepared.dark_probability[0])
    click2 = _detect(rng, photons[1], prepared.efficiency[1], prepared.dark_probability[1])
    return click1, click2


class ActiveBatch(NamedTuple):
    gaps: np.ndarray  # pulses elapsed up to and including each active pulse
    click1: np.ndarray
    click2: np.ndarray


def _truncated_poisson_table(mean: float) -> np.ndarray:
    """Cumulative distribution of Poisson(mean) conditioned on n >= 1"""
    k_max = int(math.ceil(mean + 12.0 * math.sqrt(mean) + 20.0))
    k = np.arange(1, k_max + 1)
    cdf = np.cumsum(poisson.pmf(k, mean)) / -math.expm1(-mean)
    cdf[-1] = 1.0
    return cdf


class ActivePulseSampler:
    """
    Draws only the pulses on which something can click

    Five independent channels are possible per pulse: surviving pairs, surviving Raman photons
    on each side and a dark/noise click on each detector. The number of pulses between active
    ones is geometric; the active pattern is drawn conditioned on at least one non-empty
    channel, and the non-empty counts from the zero-truncated distributions.
    """

    def __init__(self, prepared: PreparedExperiment, delay: float, rng: np.random.Generator):
        self.prepared = prepared
        self.delay = delay
        self.rng = rng
        means = prepared.means
        self.thermal = means.statistics == "thermal"
        if self.thermal:
            p_pair = means.pair_mean / (1.0 + means.pair_mean)
        else:
            p_pair = -math.expm1(-means.pair_mean)
        p_raman_signal = -math.expm1(-means.raman_signal)
        p_raman_idler = -math.expm1(-means.raman_idler)
        probs = np.array([p_pair, p_raman_signal, p_raman_idler, *prepared.dark_probability])

        self.patterns = np.array([[(index >> bit) & 1 for bit in range(5)] for index in range(1, 32)], dtype=bool)
        weights = np.prod(np.where(self.patterns, probs, 1.0 - probs), axis=1)
        self.p_active = float(-np.expm1(np.sum(np.log1p(-probs)))) if np.all(probs < 1) else 1.0
        self.pattern_cdf = np.cumsum(weights) / weights.sum() if weights.sum() > 0 else None

        self.pair_table = None if self.thermal or means.pair_mean == 0 else _truncated_poisson_table(means.pair_mean)
        self.raman_signal_table = _truncated_poisson_table(means.raman_signal) if means.raman_signal > 0 else None
        self.raman_idler_table = _truncated_poisson_table(means.raman_idler) if means.raman_idler > 0 else None

    def _truncated(self, table: Optional[np.ndarray], mask: np.ndarray) -> np.ndarray:
        u = self.rng.random(mask.size)
        counts = np.zeros(mask.size, dtype=np.int64)
        if table is not None:
            values = np.minimum(np.searchsorted(table, u, side="right"), table.size - 1) + 1
            counts[mask] = values[mask]
        return counts

    def draw(self, size: int = BATCH_SIZE) -> ActiveBatch:
        rng = self.rng
        prepared = self.prepared
        means = prepared.means

        gaps = rng.geometric(self.p_active, size=size)
        pattern = np.minimum(np.searchsorted(self.pattern_cdf, rng.random(size), side="right"), 30)
        flags = self.patterns[pattern]

        if self.thermal:
            pairs = np.where(flags[:, 0], rng.geometric(1.0 / (1.0 + means.pair_mean), size=size), 0)
        else:
            pairs = self._truncated(self.pair_table, flags[:, 0])
        raman_signal = self._truncated(self.raman_signal_table, flags[:, 1])
        raman_idler = self._truncated(self.raman_idler_table, flags[:, 2])

        both = rng.binomial(pairs, means.fraction_both)
        rest = pairs - both
        remaining = 1.0 - means.fraction_both
        signal_share = means.fraction_signal_only / remaining if remaining > 0 else 0.0
        signal_only = rng.binomial(rest, min(signal_share, 1.0))
        idler_only = rest - signal_only

        n_signal = both + signal_only + raman_signal
        n_idler = both + idler_only + raman_idler
        interfering = (both == 1) & (n_signal == 1) & (n_idler == 1)

        if prepared.relative_jitter > 0:
            tau = self.delay + rng.normal(0.0, prepared.relative_jitter, size=size)
        else:
            tau = np.full(size, self.delay)
        p_bunch = 0.5 * (1.0 + prepared.xi2 * prepared.overlap2(tau))
        bunched = rng.random(size) < p_bunch
        to_first_port = rng.random(size) < 0.5

        total = n_signal + n_idler
        first = rng.binomial(total, 0.5)
        first = np.where(interfering, np.where(bunched, np.where(to_first_port, 2, 0), 1), first)
        second = total - first

        e1, e2 = prepared.efficiency
        photon1 = rng.random(size) < 1.0 - (1.0 - e1) ** first
        photon2 = rng.random(size) < 1.0 - (1.0 - e2) ** second
        return ActiveBatch(gaps=gaps, click1=photon1 | flags[:, 3], click2=photon2 | flags[:, 4])


def start_reachable(prepared: PreparedExperiment) -> bool:
    k = prepared.start_index
    if prepared.dark_probability[k] > 0:
        return True
    means = prepared.means
    photons = means.pair_mean + means.raman_signal + means.raman_idler
    return prepared.efficiency[k] > 0 and photons > 0


class PointResult(NamedTuple):
    point: CurvePoint
    pulses: int
    complete: bool


def run_point(prepared: PreparedExperiment, delay: float, rng: np.random.Generator,
              n_start_pulses: int, pulse_cap: int = DEFAULT_PULSE_CAP) -> PointResult:
    """Accumulate one delay setting until the start detector reaches n_start_pulses"""
    if not start_reachable(prepared):
        return PointResult(CurvePoint(delay, 0, 0), 0, False)
    sampler = ActivePulseSampler(prepared, delay, rng)
    starts = coincidences = pulses = 0
    while True:
        batch = sampler.draw()
        start_clicks = batch.click2 if prepared.start_index else batch.click1
        coincident = batch.click1 & batch.click2
        cum_starts = np.cumsum(start_clicks)
        cum_pulses = pulses + np.cumsum(batch.gaps)
        needed = n_start_pulses - starts
        done = cum_starts[-1] >= needed
        last = int(np.searchsorted(cum_starts, needed)) if done else batch.gaps.size - 1

        if cum_pulses[last] > pulse_cap:
            kept = int(np.searchsorted(cum_pulses, pulse_cap, side="right"))
            starts += int(cum_starts[kept - 1]) if kept else 0
            coincidences += int(np.count_nonzero(coincident[:kept]))
            return PointResult(CurvePoint(delay, coincidences, starts), pulse_cap, False)

        starts += int(cum_starts[last])
        coincidences += int(np.count_nonzero(coincident[:last + 1]))
        pulses = int(cum_pulses[last])
        if done:
            return PointResult(CurvePoint(delay, coincidences, starts), pulses, True)


def run_experiment(config: ExperimentConfig, threads: int = 1,
                   progress_callback: Optional[Callable[[str, str, int], None]] = None) -> DipCurve:
    """
    Simulate every delay of the configuration

    Each delay gets its own random stream spawned from rng_seed, so the curve does not
    depend on the number of worker threads.
    """
    prepared = prepare_experiment(config)
    delays = config.delays
    seeds = np.random.SeedSequence(config.rng_seed).spawn(len(delays))
    lock = threading.Lock()
    finished = [0]

    def work(index: int) -> PointResult:
        rng = np.random.default_rng(seeds[index])
        result = run_point(prepared, delays[index], rng, config.n_start_pulses, config.pulse_cap)
        with lock:
            finished[0] += 1
            logger.info("delay %+.3f ps: %d coincidences / %d starts (%d pulses)",
                        delays[index], result.point.coincidences, result.point.starts, result.pulses)
            if progress_callback:
                progress_callback("Simulating", f"delay {delays[index]:+.2f} ps done",
                                  int(100 * finished[0] / len(delays)))
        return result

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, range(len(delays))))
    else:
        results = [work(i) for i in range(len(delays))]

    metadata = {
        "config_digest": config_digest(config),
        "rng_seed": config.rng_seed,
        "n_start_pulses": config.n_start_pulses,
        "pulses": [r.pulses for r in results],
        "partial": False,
    }
    incomplete = [r.point.delay for r in results if not r.complete]
    if incomplete:
        metadata["partial"] = True
        metadata["incomplete_delays"] = incomplete
        kept = [r.point for r in results if r.point.starts > 0]
        partial = DipCurve(kept, metadata) if kept else None
        raise PulseCapExceeded(
            f"start detector did not reach {config.n_start_pulses} clicks within {config.pulse_cap} pulses "
            f"at delays {incomplete}", partial_curve=partial)
    return DipCurve([r.point for r in results], metadata)
