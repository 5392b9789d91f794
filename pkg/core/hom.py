"""
Hong-Ou-Mandel Interference
Coincidence probability at a lossless 50/50 coupler, the Gaussian dip model and quantum beating
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import simpson

from .errors import DomainError, QuadratureError
from .units import GHZ, PS
from .wavepacket import (
    JointSpectralAmplitude,
    SpectralWavepacket,
    mode_overlap,
    overlap_squared,
)

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

JOINT_MIN_POINTS = 513
JOINT_MAX_POINTS = 2049
JOINT_TOL = 1e-7
# Rows of the difference axis evaluated at once
_ROW_CHUNK = 256


@dataclass(frozen=True)
class DipModel:
    """N_c(dtau) = C (1 - V exp(-dtau^2 / 2 sigma^2))"""
    C: float
    V: float
    sigma: float  # ps

    def __post_init__(self):
        if not self.C >= 0:
            raise DomainError(f"C must be non-negative, got {self.C}")
        if not 0.0 <= self.V <= 1.0:
            raise DomainError(f"V must be in [0, 1], got {self.V}")
        if not self.sigma > 0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")


@dataclass
class ProbabilityCurve:
    """Analytic coincidence probability versus delay"""
    delays: np.ndarray  # ps
    probabilities: np.ndarray
    generator: str
    metadata: Dict[str, Any] = field(default_factory=dict)

    def as_arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.delays, dtype=float), np.asarray(self.probabilities, dtype=float)

    def __len__(self):
        return len(self.delays)


def dip_function(delays: ArrayLike, C: float, V: float, sigma: float) -> ArrayLike:
    """Gaussian dip without parameter validation (fit parameters may leave the physical box)"""
    return C * (1.0 - V * np.exp(-np.square(delays) / (2.0 * sigma ** 2)))


def eval_dip_model(model: DipModel, delta_tau: ArrayLike) -> ArrayLike:
    result = dip_function(np.asarray(delta_tau, dtype=float), model.C, model.V, model.sigma)
    return float(result) if np.ndim(result) == 0 else result


def _check_overlap(distinguishability_overlap: float):
    if not 0.0 <= distinguishability_overlap <= 1.0:
        raise DomainError(f"distinguishability_overlap must be in [0, 1], got {distinguishability_overlap}")


def coincidence_probability_separable(wp1: SpectralWavepacket, wp2: SpectralWavepacket, delay: float,
                                      distinguishability_overlap: float = 1.0) -> float:
    """P_c = (1 - xi^2 |M(tau)|^2) / 2 for one photon in each input port"""
    _check_overlap(distinguishability_overlap)
    overlap = mode_overlap(wp1, wp2, delay)
    return min(0.5, max(0.0, 0.5 * (1.0 - distinguishability_overlap ** 2 * overlap.magnitude ** 2)))


def _joint_on_grid(jsa: JointSpectralAmplitude, taus: np.ndarray, n_points: int) -> np.ndarray:
    s, d, values = jsa.sampled(n_points)
    # exchange partner F(s, -d) on a grid symmetric about d = 0
    kernel = simpson(np.conj(values) * values[:, ::-1], x=s, axis=0)
    result = np.empty(len(taus))
    for start in range(0, len(taus), _ROW_CHUNK):
        chunk = taus[start:start + _ROW_CHUNK] * PS
        phases = np.exp(2j * math.pi * chunk[:, None] * d[None, :])
        integral = simpson(kernel[None, :] * phases, x=d, axis=1)
        result[start:start + _ROW_CHUNK] = 0.5 * (1.0 - 0.5 * integral.real)
    return result


def joint_probability_curve(jsa: JointSpectralAmplitude, delays: Sequence[float]) -> np.ndarray:
    """
    Coincidence probability of a two-photon state at every delay

    P_c = (1 - Re integral F*(nu1, nu2) F(nu2, nu1) exp(i 2 pi (nu1 - nu2) tau)) / 2, evaluated
    by tensor-grid Simpson quadrature in sum/difference coordinates; the grid doubles until
    the Richardson error estimate falls below tolerance.
    """
    taus = np.asarray(delays, dtype=float) + jsa.delay
    n = JOINT_MIN_POINTS
    previous = _joint_on_grid(jsa, taus, n)
    history: List[Tuple[int, float]] = []
    while n < JOINT_MAX_POINTS:
        n = 2 * n - 1
        current = _joint_on_grid(jsa, taus, n)
        error = float(np.max(np.abs(current - previous))) / 15.0
        history.append((n, error))
        logger.debug("joint quadrature n=%d richardson error=%.3e", n, error)
        if error < JOINT_TOL:
            return np.clip(current, 0.0, 1.0)
        previous = current
    raise QuadratureError("joint spectral quadrature did not converge",
                          {"grid_sizes": [h[0] for h in history], "errors": [h[1] for h in history],
                           "tolerance": JOINT_TOL})


def coincidence_probability_joint(jsa: JointSpectralAmplitude, delay: float) -> float:
    return float(joint_probability_curve(jsa, [delay])[0])


class SeparableGenerator:
    """Two independent photons, one per input port"""

    name = "separable"

    def __init__(self, wp1: SpectralWavepacket, wp2: SpectralWavepacket, distinguishability_overlap: float = 1.0):
        _check_overlap(distinguishability_overlap)
        self.wp1 = wp1
        self.wp2 = wp2
        self.distinguishability_overlap = distinguishability_overlap

    def evaluate(self, delays: np.ndarray) -> np.ndarray:
        m2 = overlap_squared(self.wp1, self.wp2, delays)
        return np.clip(0.5 * (1.0 - self.distinguishability_overlap ** 2 * m2), 0.0, 0.5)


class JointGenerator:
    """Frequency-entangled pair described by a joint spectral amplitude"""

    name = "joint"

    def __init__(self, jsa: JointSpectralAmplitude):
        self.jsa = jsa

    def evaluate(self, delays: np.ndarray) -> np.ndarray:
        return joint_probability_curve(self.jsa, delays)


class ModelGenerator:
    """Gaussian dip model evaluated directly"""

    name = "model"

    def __init__(self, model: DipModel):
        self.model = model

    def evaluate(self, delays: np.ndarray) -> np.ndarray:
        return dip_function(delays, self.model.C, self.model.V, self.model.sigma)


Generator = Union[SeparableGenerator, JointGenerator, ModelGenerator]


def validate_delays(delays: Sequence[float]) -> np.ndarray:
    delays = np.asarray(delays, dtype=float)
    if delays.ndim != 1 or delays.size == 0:
        raise DomainError("delay list must be a non-empty sequence")
    if not np.all(np.isfinite(delays)):
        raise DomainError("delays must be finite")
    if delays.size > 1 and not np.all(np.diff(delays) > 0):
        raise DomainError("delays must be strictly increasing")
    return delays


def hom_dip_curve(generator: Generator, delays: Sequence[float]) -> ProbabilityCurve:
    delays = validate_delays(delays)
    return ProbabilityCurve(delays=delays, probabilities=np.asarray(generator.evaluate(delays), dtype=float),
                            generator=generator.name)


def find_local_minima(delays: Sequence[float], values: Sequence[float]) -> List[float]:
    """Interior local minima, each refined by a parabola through its three neighbouring samples"""
    x = np.asarray(delays, dtype=float)
    y = np.asarray(values, dtype=float)
    minima = []
    for i in range(1, len(y) - 1):
        if y[i] < y[i - 1] and y[i] <= y[i + 1]:
            x0, x1, x2 = x[i - 1], x[i], x[i + 1]
            y0, y1, y2 = y[i - 1], y[i], y[i + 1]
            denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
            a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
            b = (x2 ** 2 * (y0 - y1) + x1 ** 2 * (y2 - y0) + x0 ** 2 * (y1 - y2)) / denom
            minima.append(float(-b / (2.0 * a)) if a > 0 else float(x1))
    return minima


def beating_period(curve: ProbabilityCurve) -> float:
    """Mean spacing (ps) of adjacent coincidence minima"""
    minima = find_local_minima(*curve.as_arrays())
    if len(minima) < 2:
        raise DomainError("need at least two local minima to measure a beating period")
    return float(np.mean(np.diff(minima)))


def frequency_erasure_check(before: Tuple[SpectralWavepacket, SpectralWavepacket],
                            after: Tuple[SpectralWavepacket, SpectralWavepacket],
                            distinguishability_overlap: float = 1.0) -> Dict[str, float]:
    """Zero-delay coincidence probability of a photon pair before and after frequency conversion"""
    p_before = coincidence_probability_separable(before[0], before[1], 0.0, distinguishability_overlap)
    p_after = coincidence_probability_separable(after[0], after[1], 0.0, distinguishability_overlap)
    return {
        "p_before": p_before,
        "p_after": p_after,
        "detuning_before_ghz": abs(before[0].center_frequency - before[1].center_frequency) * 1e3,
        "detuning_after_ghz": abs(after[0].center_frequency - after[1].center_frequency) * 1e3,
    }


def implied_dip_parameters(curve: ProbabilityCurve, baseline: Optional[float] = 0.5) -> Dict[str, float]:
    """Depth of a probability curve against its distinguishable-photon baseline"""
    _, p = curve.as_arrays()
    floor = float(np.min(p))
    base = baseline if baseline is not None else float(np.max(p))
    return {"p_min": floor, "baseline": base, "V": (base - floor) / base if base > 0 else 0.0}


def beat_frequency_ghz(period_ps: float) -> float:
    return 1.0 / (period_ps * PS) / GHZ
