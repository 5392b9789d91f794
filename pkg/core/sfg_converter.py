"""
SFG Up-Converter
Two-mode sum-frequency rotation, phase-matching response and frequency translation of single photons
"""
import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np
from scipy.integrate import simpson

from .errors import DomainError
from .units import FWHM_PER_SIGMA, GHZ, THZ, fwhm_to_sigma
from .wavepacket import GRID_SPAN_SIGMAS, MIN_GRID_POINTS, SpectralWavepacket

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# Survival below this is reported as zero and flagged
EXTINCTION_THRESHOLD = 1e-12


@dataclass(frozen=True)
class ConverterSpec:
    """One PPLN up-converter"""
    pump_frequency: float  # THz
    peak_efficiency: float
    response_center: float  # THz, input side
    response_fwhm: float  # GHz; math.inf gives a flat response
    noise_rate: float = 0.0  # cps reaching the detectors
    pump_power_mw: float = 0.0  # provenance only
    ripple_depth: float = 0.0
    ripple_period: float = 10.0  # GHz

    def __post_init__(self):
        if not 0.0 <= self.peak_efficiency <= 1.0:
            raise DomainError(f"peak_efficiency must be in [0, 1], got {self.peak_efficiency}")
        if not self.response_fwhm > 0:
            raise DomainError(f"response_fwhm must be positive, got {self.response_fwhm}")
        if not self.noise_rate >= 0:
            raise DomainError(f"noise_rate must be non-negative, got {self.noise_rate}")
        if not self.pump_frequency >= 0:
            raise DomainError(f"pump_frequency must be non-negative, got {self.pump_frequency}")
        if not 0.0 <= self.ripple_depth < 1.0:
            raise DomainError(f"ripple_depth must be in [0, 1), got {self.ripple_depth}")
        if not self.ripple_period > 0:
            raise DomainError("ripple_period must be positive")

    @property
    def theta(self) -> float:
        """Conversion angle chi*t with sin^2(theta) = peak_efficiency"""
        return math.asin(math.sqrt(self.peak_efficiency))

    @classmethod
    def identity(cls, response_center: float, transmission: float = 1.0, noise_rate: float = 0.0):
        """Converter that leaves the frequency alone (zero pump, flat response)"""
        return cls(pump_frequency=0.0, peak_efficiency=transmission, response_center=response_center,
                   response_fwhm=math.inf, noise_rate=noise_rate)


@dataclass(frozen=True)
class ModePairState:
    """Coherent amplitudes of the long-wavelength (input) and short-wavelength (SFG) modes"""
    amplitude_L: complex
    amplitude_S: complex

    @property
    def total_number(self):
        return np.abs(self.amplitude_L) ** 2 + np.abs(self.amplitude_S) ** 2


class ConversionOutcome(NamedTuple):
    wavepacket: SpectralWavepacket
    survival_probability: float
    extinguished: bool


def evolve_modes(state: ModePairState, theta: ArrayLike) -> ModePairState:
    """Closed-form rotation of the mode pair by the conversion angle theta"""
    c = np.cos(theta)
    s = np.sin(theta)
    return ModePairState(
        amplitude_L=state.amplitude_L * c - state.amplitude_S * s,
        amplitude_S=state.amplitude_S * c + state.amplitude_L * s,
    )


def integrate_heisenberg(state: ModePairState, chi: ArrayLike, t: float, dt: float) -> ModePairState:
    """
    Fixed-step RK4 integration of da_L/dt = -chi a_S, da_S/dt = chi a_L

    chi may be an array, in which case every coupling is integrated at once.
    The step is shrunk so that an integer number of steps lands exactly on t.
    """
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt}")
    if t < 0:
        raise DomainError(f"t must be non-negative, got {t}")
    if t == 0:
        return state
    if dt > t / 1000.0 * (1.0 + 1e-12):
        raise DomainError(f"dt={dt} too coarse, need dt <= t/1000")

    n_steps = int(math.ceil(t / dt - 1e-9))
    h = t / n_steps
    chi = np.asarray(chi, dtype=float)
    a_l = np.asarray(state.amplitude_L, dtype=complex) * np.ones_like(chi)
    a_s = np.asarray(state.amplitude_S, dtype=complex) * np.ones_like(chi)

    def rhs(al, as_):
        return -chi * as_, chi * al

    for _ in range(n_steps):
        k1l, k1s = rhs(a_l, a_s)
        k2l, k2s = rhs(a_l + 0.5 * h * k1l, a_s + 0.5 * h * k1s)
        k3l, k3s = rhs(a_l + 0.5 * h * k2l, a_s + 0.5 * h * k2s)
        k4l, k4s = rhs(a_l + h * k3l, a_s + h * k3s)
        a_l = a_l + h / 6.0 * (k1l + 2.0 * k2l + 2.0 * k3l + k4l)
        a_s = a_s + h / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s)

    if a_l.ndim == 0:
        return ModePairState(complex(a_l), complex(a_s))
    return ModePairState(a_l, a_s)


def mean_sfg_photons(mean_input: float, mean_sfg_in: float, theta: ArrayLike) -> ArrayLike:
    """<n_S> = <n_S0> cos^2(theta) + <n_L0> sin^2(theta)"""
    return mean_sfg_in * np.cos(theta) ** 2 + mean_input * np.sin(theta) ** 2


def spontaneous_noise_in_ideal_sfg(theta: ArrayLike = math.pi / 2) -> ArrayLike:
    """SFG photons produced from vacuum in both modes; always exactly zero"""
    return mean_sfg_photons(0.0, 0.0, theta)


def _ripple(spec: ConverterSpec, detuning_ghz: ArrayLike) -> ArrayLike:
    if spec.ripple_depth == 0.0:
        return 1.0
    # factor in [1 - depth, 1] so the efficiency never exceeds the peak
    return 1.0 - spec.ripple_depth * 0.5 * (1.0 - np.cos(2.0 * math.pi * detuning_ghz / spec.ripple_period))


def response(spec: ConverterSpec, input_frequency: ArrayLike) -> ArrayLike:
    """Normalized phase-matching response R(f), R(response_center) = 1"""
    detuning_ghz = (np.asarray(input_frequency, dtype=float) - spec.response_center) * 1e3
    if math.isinf(spec.response_fwhm):
        shape = np.ones_like(detuning_ghz)
    else:
        sigma = fwhm_to_sigma(spec.response_fwhm)
        shape = np.exp(-np.square(detuning_ghz) / (2.0 * sigma ** 2))
    result = shape * _ripple(spec, detuning_ghz)
    return float(result) if np.ndim(result) == 0 else result


def conversion_efficiency(spec: ConverterSpec, input_frequency: ArrayLike) -> ArrayLike:
    """eta(f) = peak_efficiency * R(f)"""
    return spec.peak_efficiency * response(spec, input_frequency)


def pump_frequency_for_target(input_frequency: float, target_frequency: float) -> float:
    """Pump frequency (THz) that sum-frequency mixes input_frequency onto target_frequency"""
    pump = target_frequency - input_frequency
    if not pump > 0:
        raise DomainError(f"target {target_frequency} THz is not above input {input_frequency} THz")
    return pump


def _convert_closed(spec: ConverterSpec, wp: SpectralWavepacket):
    sigma_in = fwhm_to_sigma(wp.fwhm_bandwidth)  # GHz
    if math.isinf(spec.response_fwhm):
        return spec.peak_efficiency, 0.0, wp.fwhm_bandwidth
    sigma_r = fwhm_to_sigma(spec.response_fwhm)
    total = sigma_in ** 2 + sigma_r ** 2
    detuning = (wp.center_frequency - spec.response_center) * 1e3
    survival = spec.peak_efficiency * sigma_r / math.sqrt(total) * math.exp(-detuning ** 2 / (2.0 * total))
    shift_ghz = sigma_in ** 2 * (-detuning) / total
    sigma_out = sigma_in * sigma_r / math.sqrt(total)
    return survival, shift_ghz, sigma_out * FWHM_PER_SIGMA


def _convert_quadrature(spec: ConverterSpec, wp: SpectralWavepacket):
    span = GRID_SPAN_SIGMAS * wp.amplitude_sigma_hz
    x = np.linspace(-span, span, 4 * MIN_GRID_POINTS - 3)
    density = np.abs(wp.amplitude(x)) ** 2 / wp.amplitude_scale ** 2
    weights = density * conversion_efficiency(spec, wp.center_frequency + x / THZ)
    survival = float(simpson(weights, x=x))
    if survival <= 0:
        return 0.0, 0.0, wp.fwhm_bandwidth
    mean = float(simpson(weights * x, x=x)) / survival
    variance = float(simpson(weights * (x - mean) ** 2, x=x)) / survival
    return survival, mean / GHZ, math.sqrt(variance) / GHZ * FWHM_PER_SIGMA


def convert_wavepacket(spec: ConverterSpec, wp: SpectralWavepacket) -> ConversionOutcome:
    """
    Up-convert one photon

    The output amplitude is the input amplitude filtered by sqrt(R), moved up by the pump
    frequency. With a Gaussian response the filtered photon is again Gaussian; with ripple
    enabled the output is the Gaussian with the filtered spectrum's mean and variance.

    Returns:
        ConversionOutcome(wavepacket, survival_probability, extinguished)
    """
    if spec.ripple_depth > 0:
        survival, shift_ghz, fwhm_out = _convert_quadrature(spec, wp)
    else:
        survival, shift_ghz, fwhm_out = _convert_closed(spec, wp)

    survival = min(survival, spec.peak_efficiency)
    extinguished = survival < EXTINCTION_THRESHOLD
    if extinguished:
        logger.warning("photon at %.6f THz extinguished by converter centred at %.6f THz",
                       wp.center_frequency, spec.response_center)
        survival = 0.0

    filtered_center = wp.center_frequency + shift_ghz / 1e3
    output = SpectralWavepacket(
        center_frequency=filtered_center + spec.pump_frequency,
        fwhm_bandwidth=fwhm_out,
        delay=wp.delay,
        amplitude_scale=wp.amplitude_scale,
    )
    return ConversionOutcome(output, survival, extinguished)
