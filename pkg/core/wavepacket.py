"""
Spectral Wavepackets
Gaussian single-photon and two-photon spectral amplitudes, mode overlaps and coherence times
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np
from scipy.integrate import simpson

from .errors import DomainError, QuadratureError
from .units import GHZ, PS, THZ, fwhm_to_sigma

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# Grid half-span in amplitude sigmas and quadrature refinement limits
GRID_SPAN_SIGMAS = 6.0
MIN_GRID_POINTS = 2049
MAX_GRID_POINTS = 2 ** 20 + 1
QUADRATURE_TOL = 1e-8


def _require_positive(name: str, value: float):
    if not (value > 0) or math.isnan(value):
        raise DomainError(f"{name} must be positive, got {value!r}")


@dataclass(frozen=True)
class SpectralWavepacket:
    """Transform-limited Gaussian single-photon amplitude"""
    center_frequency: float  # THz
    fwhm_bandwidth: float  # GHz, intensity FWHM
    delay: float = 0.0  # ps
    amplitude_scale: float = 1.0

    def __post_init__(self):
        _require_positive("center_frequency", self.center_frequency)
        _require_positive("fwhm_bandwidth", self.fwhm_bandwidth)
        if not math.isfinite(self.fwhm_bandwidth):
            raise DomainError("fwhm_bandwidth must be finite")
        if not math.isfinite(self.delay):
            raise DomainError(f"delay must be finite, got {self.delay!r}")

    @property
    def sigma_hz(self) -> float:
        """rms width of the spectral intensity in Hz"""
        return fwhm_to_sigma(self.fwhm_bandwidth) * GHZ

    @property
    def amplitude_sigma_hz(self) -> float:
        """rms width of the spectral amplitude in Hz"""
        return math.sqrt(2.0) * self.sigma_hz

    def amplitude(self, detuning_hz: ArrayLike) -> ArrayLike:
        """Spectral amplitude versus detuning from the center frequency (delay phase excluded)"""
        sigma = self.sigma_hz
        norm = self.amplitude_scale * (2.0 * math.pi * sigma ** 2) ** -0.25
        return norm * np.exp(-np.square(detuning_hz) / (4.0 * sigma ** 2))


@dataclass(frozen=True)
class OverlapResult:
    """Mode-overlap integral M(tau) as magnitude and phase"""
    magnitude: float
    phase: float  # radians

    def __post_init__(self):
        if self.magnitude > 1.0 + 1e-9:
            raise DomainError(f"overlap magnitude {self.magnitude} exceeds 1")

    @property
    def value(self) -> complex:
        return self.magnitude * complex(math.cos(self.phase), math.sin(self.phase))


@dataclass(frozen=True)
class JointSpectralAmplitude:
    """
    Two-photon spectral amplitude F(nu1, nu2), evaluated in sum/difference coordinates

    kind "separable": F = phi1(nu1) * phi2(nu2) from wp1 and wp2.
    kind "anticorrelated": narrow sum-frequency distribution (set by the pump) and a
    difference-frequency distribution with lobes at +/- difference_center, so the
    state is symmetric under exchange of the two photons' frequencies.
    """
    kind: str
    wp1: Optional[SpectralWavepacket] = None
    wp2: Optional[SpectralWavepacket] = None
    sum_center: float = 0.0  # THz
    sum_bandwidth: float = 0.0  # GHz, intensity FWHM
    difference_center: float = 0.0  # GHz
    difference_bandwidth: float = 0.0  # GHz, intensity FWHM of one lobe
    delay: float = 0.0  # ps, applied to arm 2

    def __post_init__(self):
        if self.kind == "separable":
            if self.wp1 is None or self.wp2 is None:
                raise DomainError("separable JSA needs wp1 and wp2")
        elif self.kind == "anticorrelated":
            _require_positive("sum_center", self.sum_center)
            _require_positive("sum_bandwidth", self.sum_bandwidth)
            _require_positive("difference_bandwidth", self.difference_bandwidth)
            if not math.isfinite(self.difference_center):
                raise DomainError("difference_center must be finite")
        else:
            raise DomainError(f"unknown JSA kind {self.kind!r}")

    @classmethod
    def separable(cls, wp1: SpectralWavepacket, wp2: SpectralWavepacket, delay: float = 0.0):
        return cls(kind="separable", wp1=wp1, wp2=wp2, delay=delay)

    @classmethod
    def anticorrelated(cls, sum_center: float, sum_bandwidth: float, difference_center: float,
                       difference_bandwidth: float, delay: float = 0.0):
        return cls(kind="anticorrelated", sum_center=sum_center, sum_bandwidth=sum_bandwidth,
                   difference_center=difference_center, difference_bandwidth=difference_bandwidth,
                   delay=delay)

    def grid_extent(self) -> Tuple[float, float]:
        """Half-spans (Hz) of the sum-offset and difference axes"""
        if self.kind == "separable":
            a, b = self.wp1.amplitude_sigma_hz, self.wp2.amplitude_sigma_hz
            width = math.hypot(a, b)
            d_center = abs(self.wp1.center_frequency - self.wp2.center_frequency) * THZ
            return GRID_SPAN_SIGMAS * width, d_center + GRID_SPAN_SIGMAS * width
        sum_sigma = math.sqrt(2.0) * fwhm_to_sigma(self.sum_bandwidth) * GHZ
        diff_sigma = math.sqrt(2.0) * fwhm_to_sigma(self.difference_bandwidth) * GHZ
        return (GRID_SPAN_SIGMAS * sum_sigma,
                abs(self.difference_center) * GHZ + GRID_SPAN_SIGMAS * diff_sigma)

    def amplitude(self, s_offset_hz: np.ndarray, d_hz: np.ndarray) -> np.ndarray:
        """Unnormalized F at sum offset s (from the pair's mean sum) and difference d"""
        if self.kind == "separable":
            c1 = self.wp1.center_frequency * THZ
            c2 = self.wp2.center_frequency * THZ
            # detunings of each photon from its own center
            x1 = 0.5 * (s_offset_hz + d_hz) - 0.5 * (c1 - c2)
            x2 = 0.5 * (s_offset_hz - d_hz) + 0.5 * (c1 - c2)
            return self.wp1.amplitude(x1) * self.wp2.amplitude(x2)
        sum_sigma = fwhm_to_sigma(self.sum_bandwidth) * GHZ
        diff_sigma = fwhm_to_sigma(self.difference_bandwidth) * GHZ
        dc = self.difference_center * GHZ
        sum_part = np.exp(-np.square(s_offset_hz) / (4.0 * sum_sigma ** 2))
        diff_part = (np.exp(-np.square(d_hz - dc) / (4.0 * diff_sigma ** 2))
                     + np.exp(-np.square(d_hz + dc) / (4.0 * diff_sigma ** 2)))
        return sum_part * diff_part

    def sampled(self, n_points: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Normalized F on an n_points x n_points tensor grid

        Returns:
            (s_offsets, differences, F) with F[i, j] = F(s_i, d_j) and
            0.5 * integral |F|^2 ds dd == 1 (the 1/2 is the Jacobian of nu1, nu2 -> s, d)
        """
        s_half, d_half = self.grid_extent()
        s = np.linspace(-s_half, s_half, n_points)
        d = np.linspace(-d_half, d_half, n_points)
        values = self.amplitude(s[:, None], d[None, :])
        norm = 0.5 * simpson(simpson(np.abs(values) ** 2, x=d, axis=1), x=s)
        if not norm > 0:
            raise QuadratureError("JSA vanishes on its grid", {"n_points": n_points})
        return s, d, values / math.sqrt(norm)


def integrate_adaptive(integrand: Callable[[np.ndarray], np.ndarray], lower: float, upper: float,
                       min_points: int = MIN_GRID_POINTS, tol: float = QUADRATURE_TOL) -> complex:
    """
    Simpson quadrature on a uniform grid, doubled until successive estimates agree

    Args:
        integrand: vectorized function of the abscissa (may return complex values)
        lower, upper: integration limits
        min_points: starting grid size (odd)
        tol: absolute agreement required between successive estimates
    """
    n = min_points
    previous = None
    while n <= MAX_GRID_POINTS:
        x = np.linspace(lower, upper, n)
        y = integrand(x)
        if np.iscomplexobj(y):
            estimate = complex(simpson(y.real, x=x), simpson(y.imag, x=x))
        else:
            estimate = complex(simpson(y, x=x), 0.0)
        if previous is not None and abs(estimate - previous) < tol:
            return estimate
        logger.debug("quadrature refine: n=%d estimate=%r", n, estimate)
        previous = estimate
        n = 2 * n - 1
    raise QuadratureError("adaptive quadrature did not converge",
                          {"lower": lower, "upper": upper, "max_points": MAX_GRID_POINTS,
                           "last_estimate": previous})


def coherence_sigma_from_bandwidth(fwhm_bandwidth: float) -> float:
    """
    1/e half width (ps) of the HOM dip of two identical transform-limited Gaussian photons

    sigma = sqrt(ln 2) / (pi * FWHM); 25 GHz gives 10.60 ps.
    """
    if not (fwhm_bandwidth > 0) or not math.isfinite(fwhm_bandwidth):
        raise DomainError(f"bandwidth must be positive and finite, got {fwhm_bandwidth!r}")
    return math.sqrt(math.log(2.0)) / (math.pi * fwhm_bandwidth * GHZ) / PS


def _carrier_phase(frequency_thz: float, delay_ps: float) -> float:
    # THz * ps is a cycle count; keep only the fractional part before scaling
    cycles = math.fmod(frequency_thz * delay_ps, 1.0)
    return 2.0 * math.pi * cycles


def _wrap(phase: float) -> float:
    return math.atan2(math.sin(phase), math.cos(phase))


def _closed_form_terms(wp1: SpectralWavepacket, wp2: SpectralWavepacket):
    """Amplitude prefactor, rms width c (Hz) and weighted center (THz) of phi1* phi2"""
    a2 = wp1.sigma_hz ** 2
    b2 = wp2.sigma_hz ** 2
    detuning = (wp1.center_frequency - wp2.center_frequency) * THZ
    prefactor = math.sqrt(2.0 * math.sqrt(a2 * b2) / (a2 + b2)) * math.exp(-detuning ** 2 / (4.0 * (a2 + b2)))
    c2 = a2 * b2 / (a2 + b2)
    mean_center = (wp1.center_frequency * b2 + wp2.center_frequency * a2) / (a2 + b2)
    return prefactor, c2, mean_center


def _effective_delay(wp1: SpectralWavepacket, wp2: SpectralWavepacket, relative_delay: float) -> float:
    return relative_delay + wp2.delay - wp1.delay


def _overlap_closed(wp1: SpectralWavepacket, wp2: SpectralWavepacket, tau_ps: float) -> OverlapResult:
    prefactor, c2, mean_center = _closed_form_terms(wp1, wp2)
    tau = tau_ps * PS
    magnitude = prefactor * math.exp(-4.0 * math.pi ** 2 * c2 * tau ** 2)
    return OverlapResult(magnitude=min(magnitude, 1.0), phase=_wrap(_carrier_phase(mean_center, tau_ps)))


def _overlap_quadrature(wp1: SpectralWavepacket, wp2: SpectralWavepacket, tau_ps: float) -> OverlapResult:
    reference = 0.5 * (wp1.center_frequency + wp2.center_frequency)
    offset1 = (wp1.center_frequency - reference) * THZ
    offset2 = (wp2.center_frequency - reference) * THZ
    span = GRID_SPAN_SIGMAS * max(wp1.amplitude_sigma_hz, wp2.amplitude_sigma_hz)
    lower = min(offset1, offset2) - span
    upper = max(offset1, offset2) + span
    tau = tau_ps * PS
    scale = 1.0 / (wp1.amplitude_scale * wp2.amplitude_scale)

    def integrand(x):
        envelope = wp1.amplitude(x - offset1) * wp2.amplitude(x - offset2) * scale
        return envelope * np.exp(2j * math.pi * x * tau)

    value = integrate_adaptive(integrand, lower, upper)
    value *= complex(math.cos(_carrier_phase(reference, tau_ps)), math.sin(_carrier_phase(reference, tau_ps)))
    return OverlapResult(magnitude=min(abs(value), 1.0 + 1e-9), phase=_wrap(math.atan2(value.imag, value.real)))


def mode_overlap(wp1: SpectralWavepacket, wp2: SpectralWavepacket, relative_delay: float,
                 method: str = "auto") -> OverlapResult:
    """
    M(tau) = integral phi1*(nu) phi2(nu) exp(i 2 pi nu tau) d nu for normalized amplitudes

    tau is relative_delay plus the difference of the wavepackets' own delays.
    method "auto" uses the closed form for equal bandwidths and quadrature otherwise;
    "closed" and "quadrature" force one path.
    """
    tau = _effective_delay(wp1, wp2, relative_delay)
    if method == "auto":
        method = "closed" if wp1.fwhm_bandwidth == wp2.fwhm_bandwidth else "quadrature"
    if method == "closed":
        return _overlap_closed(wp1, wp2, tau)
    if method == "quadrature":
        return _overlap_quadrature(wp1, wp2, tau)
    raise DomainError(f"unknown overlap method {method!r}")


def overlap_squared(wp1: SpectralWavepacket, wp2: SpectralWavepacket, delays: ArrayLike) -> np.ndarray:
    """Vectorized closed-form |M(tau)|^2 for Gaussians of any bandwidths"""
    prefactor, c2, _ = _closed_form_terms(wp1, wp2)
    tau = (np.asarray(delays, dtype=float) + wp2.delay - wp1.delay) * PS
    return prefactor ** 2 * np.exp(-8.0 * math.pi ** 2 * c2 * np.square(tau))


def overlap_sigma(wp1: SpectralWavepacket, wp2: SpectralWavepacket) -> float:
    """1/e half width (ps) of |M(tau)|^2 written as exp(-tau^2 / 2 sigma^2)"""
    _, c2, _ = _closed_form_terms(wp1, wp2)
    return 1.0 / (4.0 * math.pi * math.sqrt(c2)) / PS


def jitter_averaged_overlap_squared(wp1: SpectralWavepacket, wp2: SpectralWavepacket,
                                    delays: ArrayLike, relative_jitter_sigma: float) -> np.ndarray:
    """
    |M|^2 averaged over a Gaussian relative arrival-time jitter (rms, ps)

    Jitter broadens the dip and lowers its depth by sigma / sqrt(sigma^2 + jitter^2).
    """
    if relative_jitter_sigma < 0:
        raise DomainError("jitter sigma must be non-negative")
    if relative_jitter_sigma == 0:
        return overlap_squared(wp1, wp2, delays)
    sigma = overlap_sigma(wp1, wp2)
    peak = overlap_squared(wp1, wp2, -(wp2.delay - wp1.delay))
    broadened2 = sigma ** 2 + relative_jitter_sigma ** 2
    tau = np.asarray(delays, dtype=float) + wp2.delay - wp1.delay
    return peak * sigma / math.sqrt(broadened2) * np.exp(-np.square(tau) / (2.0 * broadened2))


def temporal_intensity(wp: SpectralWavepacket, t: ArrayLike) -> ArrayLike:
    """
    Temporal intensity (per ps) of the transform-limited photon

    Proportional to exp(-(t - delay)^2 / sigma^2) with sigma the coherence sigma,
    so its 1/e half width equals sigma; integrates to amplitude_scale^2.
    """
    sigma = coherence_sigma_from_bandwidth(wp.fwhm_bandwidth)
    peak = wp.amplitude_scale ** 2 / (sigma * math.sqrt(math.pi))
    return peak * np.exp(-np.square(np.asarray(t, dtype=float) - wp.delay) / sigma ** 2)


def spectral_normalization(wp: SpectralWavepacket) -> float:
    """Quadrature of |phi|^2 over +/- 6 amplitude sigmas (equals amplitude_scale^2)"""
    span = GRID_SPAN_SIGMAS * wp.amplitude_sigma_hz
    return integrate_adaptive(lambda x: np.abs(wp.amplitude(x)) ** 2, -span, span).real
