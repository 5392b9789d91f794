"""
Dip Fitting
Weighted Levenberg-Marquardt estimation of (C, V, sigma) for the Gaussian HOM dip, with uncertainties
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from .errors import FitError
from .hom import DipModel, dip_function
from .montecarlo import CurvePoint, DipCurve
from .wavepacket import coherence_sigma_from_bandwidth

logger = logging.getLogger(__name__)

MAX_ITERATIONS = 200
STEP_TOL = 1e-10
GRADIENT_TOL = 1e-12
V_BOUNDS = (0.0, 1.05)
MIN_POINTS = 5
PARAMETER_NAMES = ("C", "V", "sigma")


@dataclass
class FitResult:
    C: float
    V: float
    sigma: float  # ps
    C_err: float = 0.0
    V_err: float = 0.0
    sigma_err: float = 0.0
    covariance: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    chi2_reduced: float = 0.0
    n_iterations: int = 0
    converged: bool = True
    gradient_norm: float = 0.0
    n_points: int = 0
    flags: List[str] = field(default_factory=list)
    message: str = ""

    @property
    def model(self) -> DipModel:
        return DipModel(C=max(self.C, 0.0), V=min(max(self.V, 0.0), 1.0), sigma=self.sigma)

    def dip_floor(self) -> float:
        return self.C * (1.0 - self.V)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "C": self.C, "C_err": self.C_err,
            "V": self.V, "V_err": self.V_err,
            "sigma_ps": self.sigma, "sigma_err_ps": self.sigma_err,
            "covariance": np.asarray(self.covariance).tolist(),
            "chi2_reduced": self.chi2_reduced,
            "n_iterations": self.n_iterations,
            "converged": self.converged,
            "gradient_norm": self.gradient_norm,
            "n_points": self.n_points,
            "flags": list(self.flags),
            "message": self.message,
        }

    def to_text(self) -> str:
        lines = [
            f"C = {self.C:.6g} +/- {self.C_err:.3g}",
            f"V = {self.V:.6g} +/- {self.V_err:.3g}",
            f"sigma = {self.sigma:.6g} +/- {self.sigma_err:.3g} ps",
            f"chi2_reduced = {self.chi2_reduced:.6g}",
            f"iterations = {self.n_iterations}",
            f"converged = {self.converged}",
        ]
        if self.flags:
            lines.append(f"flags = {', '.join(self.flags)}")
        return "\n".join(lines)


@dataclass(frozen=True)
class CoherenceReport:
    sigma_fit: float
    sigma_err: float
    sigma_theory: float
    z_score: float
    consistent: bool


def dip_jacobian(delays: np.ndarray, C: float, V: float, sigma: float) -> np.ndarray:
    """d N_c / d(C, V, sigma) as an (n, 3) array"""
    delays = np.asarray(delays, dtype=float)
    g = np.exp(-np.square(delays) / (2.0 * sigma ** 2))
    return np.column_stack([
        1.0 - V * g,
        -C * g,
        -C * V * g * np.square(delays) / sigma ** 3,
    ])


def jacobian_check(model: DipModel, delta_tau: float) -> float:
    """Largest relative gap between the analytic Jacobian and central differences"""
    params = np.array([model.C, model.V, model.sigma])
    analytic = dip_jacobian(np.array([delta_tau]), *params)[0]
    value = abs(float(dip_function(delta_tau, *params)))
    atol = 1e-9 * max(value, 1.0)
    worst = 0.0
    for i in range(3):
        h = 1e-6 * (abs(params[i]) if params[i] != 0 else 1.0)
        up, down = params.copy(), params.copy()
        up[i] += h
        down[i] -= h
        numeric = (dip_function(delta_tau, *up) - dip_function(delta_tau, *down)) / (2.0 * h)
        scale = max(abs(analytic[i]), abs(numeric), atol)
        worst = max(worst, abs(analytic[i] - numeric) / scale)
    return float(worst)


def initial_guess(delays: np.ndarray, counts: np.ndarray) -> Tuple[float, float, float]:
    """Baseline from the outer quarter, depth from the minimum, width from the half-depth crossing"""
    order = np.argsort(np.abs(delays))
    n_outer = max(1, int(round(0.25 * len(delays))))
    C0 = float(np.mean(counts[order[-n_outer:]]))
    i_min = int(np.argmin(counts))
    n_min = float(counts[i_min])
    V0 = float(np.clip(1.0 - n_min / C0, 0.05, 1.0)) if C0 > 0 else 0.05

    half = 0.5 * (C0 + n_min)
    crossings = []
    for step in (-1, 1):
        i = i_min
        while 0 <= i + step < len(counts) and counts[i + step] < half:
            i += step
        j = i + step
        if 0 <= j < len(counts) and counts[j] != counts[i]:
            x = delays[i] + (half - counts[i]) * (delays[j] - delays[i]) / (counts[j] - counts[i])
            crossings.append(abs(x - delays[i_min]))
    if crossings:
        hwhm = float(np.mean(crossings))
        sigma0 = hwhm / math.sqrt(2.0 * math.log(2.0))
    else:
        sigma0 = (delays[-1] - delays[0]) / 8.0
    return C0, V0, max(sigma0, 1e-3 * (delays[-1] - delays[0]))


def _project(params: np.ndarray, sigma_floor: float) -> np.ndarray:
    return np.array([max(params[0], 0.0), min(max(params[1], V_BOUNDS[0]), V_BOUNDS[1]), max(params[2], sigma_floor)])


def _projected_gradient(gradient: np.ndarray, params: np.ndarray) -> np.ndarray:
    """Zero the components that push against an active bound"""
    g = gradient.copy()
    # gradient of S is -2 J^T W r; a descent direction is +J^T W r, stored here
    if params[1] <= V_BOUNDS[0] and g[1] < 0:
        g[1] = 0.0
    if params[1] >= V_BOUNDS[1] and g[1] > 0:
        g[1] = 0.0
    if params[0] <= 0.0 and g[0] < 0:
        g[0] = 0.0
    return g


def fit_counts(delays: Sequence[float], counts: Sequence[float],
               initial: Optional[Tuple[float, float, float]] = None,
               max_iterations: int = MAX_ITERATIONS) -> FitResult:
    """
    Fit N_c = C (1 - V exp(-dtau^2 / 2 sigma^2)) to counts with Poisson weights 1/max(N, 1)

    Projected Levenberg-Marquardt with Marquardt diagonal scaling; the damping is adapted
    from the ratio of actual to predicted reduction of the weighted residual sum.
    """
    x = np.asarray(delays, dtype=float)
    y = np.asarray(counts, dtype=float)
    if x.size < MIN_POINTS:
        raise FitError(f"need at least {MIN_POINTS} points to fit, got {x.size}")
    if x.shape != y.shape:
        raise FitError("delays and counts differ in length")
    if np.any(y < 0):
        raise FitError("counts must be non-negative")
    order = np.argsort(x)
    x, y = x[order], y[order]

    guess = initial_guess(x, y)
    params = np.array(initial if initial is not None else guess, dtype=float)
    flags: List[str] = []
    if not np.any(np.abs(x) > 2.0 * guess[2]):
        raise FitError(f"no baseline point beyond 2 x the initial width ({2.0 * guess[2]:.3g} ps)")
    step = float(np.median(np.diff(x)))
    if abs(x[int(np.argmin(y))]) > step * (1.0 + 1e-9):
        logger.warning("dip minimum at %.3g ps is more than one step from zero delay; "
                       "the model has no centre parameter", x[int(np.argmin(y))])
        flags.append("uncentred")

    weights = 1.0 / np.maximum(y, 1.0)
    sigma_floor = 1e-6 * (x[-1] - x[0])
    params = _project(params, sigma_floor)

    def evaluate(p):
        residual = y - dip_function(x, *p)
        return residual, float(np.sum(weights * residual ** 2))

    residual, cost = evaluate(params)
    damping = 1e-3
    nu = 2.0
    converged = False
    iterations = 0
    gradient = np.zeros(3)
    for iterations in range(1, max_iterations + 1):
        J = dip_jacobian(x, *params)
        A = J.T @ (weights[:, None] * J)
        gradient = J.T @ (weights * residual)
        scale = np.maximum(np.abs(params), 1e-12)
        if np.linalg.norm(_projected_gradient(gradient, params) * scale) < GRADIENT_TOL:
            converged = True
            break

        diag = np.diag(A).copy()
        diag[diag <= 0] = max(float(np.max(diag)), 1.0) * 1e-12
        try:
            delta = linalg.solve(A + damping * np.diag(diag), gradient, assume_a="sym")
        except (linalg.LinAlgError, ValueError):
            damping *= nu
            nu *= 2.0
            continue
        trial = _project(params + delta, sigma_floor)
        delta = trial - params
        predicted = float(2.0 * delta @ gradient - delta @ A @ delta)
        trial_residual, trial_cost = evaluate(trial)
        actual = cost - trial_cost
        gain = actual / predicted if predicted > 0 else -1.0
        logger.debug("fit iteration %d: cost=%.6g gain=%.3g damping=%.3g params=%s",
                     iterations, cost, gain, damping, trial)

        if gain > 0:
            relative_change = float(np.max(np.abs(delta) / np.maximum(np.abs(params), 1e-12)))
            params, residual, cost = trial, trial_residual, trial_cost
            damping *= max(1.0 / 3.0, 1.0 - (2.0 * gain - 1.0) ** 3)
            nu = 2.0
            if relative_change < STEP_TOL:
                converged = True
                break
        else:
            relative_change = float(np.max(np.abs(delta) / np.maximum(np.abs(params), 1e-12)))
            if relative_change < STEP_TOL:
                converged = True
                break
            damping *= nu
            nu *= 2.0

    J = dip_jacobian(x, *params)
    gradient = J.T @ (weights * residual)
    result = _finish(x, params, J, weights, cost, iterations, converged, gradient, flags)
    if not converged:
        result.message = f"no convergence after {max_iterations} iterations"
        logger.warning("dip fit did not converge after %d iterations", max_iterations)
    return result


def _finish(x, params, J, weights, cost, iterations, converged, gradient, flags) -> FitResult:
    n = x.size
    dof = max(n - 3, 1)
    chi2_reduced = cost / dof
    A = J.T @ (weights[:, None] * J)

    identifiable = [0, 1, 2]
    if params[1] <= 1e-12 or abs(A[2, 2]) <= 1e-12 * max(abs(A[0, 0]), 1.0):
        # a vanishing dip leaves the width undetermined
        identifiable = [0, 1]
    sub = A[np.ix_(identifiable, identifiable)]
    covariance = np.full((3, 3), np.inf)
    covariance[np.ix_(identifiable, identifiable)] = np.linalg.pinv(sub) * chi2_reduced
    errors = np.sqrt(np.abs(np.diag(covariance)))

    if params[1] > 1.0:
        logger.warning("fitted visibility %.4f exceeds 1", params[1])
        flags.append("V_above_one")
    if len(identifiable) < 3 or params[1] < errors[1]:
        flags.append("degenerate")
    if not converged:
        flags.append("max_iterations")

    return FitResult(
        C=float(params[0]), V=float(params[1]), sigma=float(params[2]),
        C_err=float(errors[0]), V_err=float(errors[1]), sigma_err=float(errors[2]),
        covariance=covariance, chi2_reduced=float(chi2_reduced), n_iterations=iterations,
        converged=converged, gradient_norm=float(np.linalg.norm(_projected_gradient(gradient, params))),
        n_points=n, flags=flags,
    )


def fit_dip(curve, initial: Optional[Tuple[float, float, float]] = None,
            max_iterations: int = MAX_ITERATIONS) -> FitResult:
    """Fit a DipCurve (or any curve exposing as_arrays()) with the Gaussian dip model"""
    delays, counts = curve.as_arrays()
    return fit_counts(delays, counts, initial=initial, max_iterations=max_iterations)


def synthetic_curve(model: DipModel, delays: Sequence[float], seed: Optional[int] = None,
                    starts: int = 500_000) -> DipCurve:
    """Model counts at each delay; Poisson-distributed when a seed is given"""
    delays = np.asarray(delays, dtype=float)
    expected = dip_function(delays, model.C, model.V, model.sigma)
    if seed is None:
        counts = expected
    else:
        counts = np.random.default_rng(seed).poisson(expected)
    points = [CurvePoint(float(d), float(c) if seed is None else int(c), starts) for d, c in zip(delays, counts)]
    return DipCurve(points, {"synthetic": True, "seed": seed})


def bootstrap_errors(curve, replicas: int = 200, seed: int = 0, threads: int = 1) -> Dict[str, float]:
    """Spread of refitted parameters over Poisson resamplings of the observed counts"""
    delays, counts = curve.as_arrays()
    streams = np.random.SeedSequence(seed).spawn(replicas)
    reference = fit_counts(delays, counts)
    start = (reference.C, reference.V, reference.sigma)

    def refit(stream) -> Optional[np.ndarray]:
        resampled = np.random.default_rng(stream).poisson(counts)
        try:
            result = fit_counts(delays, resampled, initial=start)
        except FitError:
            return None
        return np.array([result.C, result.V, result.sigma])

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            samples = list(pool.map(refit, streams))
    else:
        samples = [refit(s) for s in streams]
    kept = np.array([s for s in samples if s is not None])
    if kept.size == 0:
        raise FitError("every bootstrap replica failed to fit")
    spread = kept.std(axis=0, ddof=1) if len(kept) > 1 else np.zeros(3)
    return {"C_err": float(spread[0]), "V_err": float(spread[1]), "sigma_err": float(spread[2]),
            "replicas": int(len(kept))}


def coherence_consistency(fit: FitResult, bandwidth: float, threshold: float = 2.0) -> CoherenceReport:
    """z-score of the fitted width against the transform-limited coherence sigma"""
    theory = coherence_sigma_from_bandwidth(bandwidth)
    difference = abs(fit.sigma - theory)
    if fit.sigma_err > 0 and math.isfinite(fit.sigma_err):
        z = difference / fit.sigma_err
    else:
        z = 0.0 if difference == 0 else math.inf
    return CoherenceReport(sigma_fit=fit.sigma, sigma_err=fit.sigma_err, sigma_theory=theory,
                           z_score=z, consistent=z <= threshold)
