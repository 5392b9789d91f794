"""
Shared Experiment Engine
Runs scenarios through the simulation library and turns the results into status dictionaries
"""
import logging
import os
import sys
from dataclasses import asdict
from typing import Any, Callable, Dict, List, Optional, Sequence

# Add the parent directory to path so we can import from core
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from core.errors import (
    CurveFormatError,
    DomainError,
    FitError,
    PulseCapExceeded,
    QuadratureError,
    ScenarioError,
    SimulationError,
)
from core.fit import bootstrap_errors, coherence_consistency, fit_dip
from core.hom import (
    JointGenerator,
    ModelGenerator,
    SeparableGenerator,
    beat_frequency_ghz,
    beating_period,
    frequency_erasure_check,
    hom_dip_curve,
    implied_dip_parameters,
)
from core.montecarlo import run_experiment
from core.pair_source import anticorrelated_jsa, emitted_wavepackets
from core.reports import read_curve_csv, write_dip_curve_csv, write_probability_csv, write_report, write_rows_csv
from core.scenario import ScenarioFile, with_override
from core.sfg_converter import convert_wavepacket
from core.visibility_budget import visibility_budget
from core.wavepacket import overlap_sigma

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_RUNTIME = 3

SWEEP_HEADER = ["value", "V_fit", "V_fit_err", "sigma_fit_ps", "sigma_fit_err_ps", "V_budget"]


class HOMExperimentEngine:
    """
    Platform-agnostic experiment engine
    Used by the command-line tool and the tests; every method returns a status dictionary
    """

    def __init__(self, threads: int = 1):
        self.threads = max(1, int(threads))
        self.progress_callback: Optional[Callable[[str, str, int], None]] = None

    def set_progress_callback(self, callback: Callable[[str, str, int], None]):
        """Set callback for progress updates (step, message, percent)"""
        self.progress_callback = callback

    def _progress(self, step: str, message: str, percent: int):
        if self.progress_callback:
            self.progress_callback(step, message, percent)

    def run(self, scenario: ScenarioFile) -> Dict[str, Any]:
        """Dispatch on the scenario's mode selector"""
        if scenario.mode == "analytic":
            return self.analytic(scenario)
        if scenario.mode == "simulate":
            return self.simulate(scenario)
        if scenario.mode == "budget":
            return self.budget(scenario)
        if scenario.mode == "sweep":
            return self.sweep(scenario)
        # fit mode analyses the curve a previous simulate run left behind
        return self.fit(f"{scenario.output_prefix}_curve.csv", scenario.output_prefix)

    def analytic(self, scenario: ScenarioFile) -> Dict[str, Any]:
        """Analytic coincidence-probability curve for the scenario's generator"""
        try:
            options = scenario.analytic
            delays = scenario.delay_values()
            summary: Dict[str, Any] = {"generator": options.generator}
            self._progress("Analytic", f"{options.generator} curve over {len(delays)} delays", 10)

            if options.generator == "model":
                model = scenario.dip_model()
                generator = ModelGenerator(model)
                summary.update({"V": model.V, "sigma_ps": model.sigma, "C": model.C})
                baseline = model.C
            elif options.generator == "joint":
                generator = JointGenerator(anticorrelated_jsa(scenario.source.to_spec()))
                baseline = 0.5
            else:
                source = scenario.source.to_spec()
                emitted = emitted_wavepackets(source)
                photons = emitted
                if options.converted:
                    signal = convert_wavepacket(scenario.converter_signal.to_spec(), emitted[0])
                    idler = convert_wavepacket(scenario.converter_idler.to_spec(), emitted[1])
                    photons = (signal.wavepacket, idler.wavepacket)
                    summary.update(frequency_erasure_check(emitted, photons, scenario.distinguishability_overlap))
                    summary["survival_signal"] = signal.survival_probability
                    summary["survival_idler"] = idler.survival_probability
                generator = SeparableGenerator(photons[0], photons[1], scenario.distinguishability_overlap)
                summary["sigma_ps"] = overlap_sigma(photons[0], photons[1])
                baseline = 0.5

            curve = hom_dip_curve(generator, delays)
            implied = implied_dip_parameters(curve, baseline=baseline)
            summary.setdefault("V", implied["V"])
            summary["p_min"] = implied["p_min"]
            if options.generator == "joint":
                summary.update(self._beating(curve))

            csv_path = write_probability_csv(curve, f"{scenario.output_prefix}_analytic.csv")
            report_paths = write_report(f"{scenario.output_prefix}_analytic", summary)
            self._progress("Analytic", "curve written", 100)
            return {
                "status": "success",
                "files": [str(csv_path)] + [str(p) for p in report_paths],
                "summary": summary,
                "exit_code": EXIT_OK,
            }
        except Exception as e:
            return self._error(e, ["Check the analytic section of the scenario"])

    @staticmethod
    def _beating(curve) -> Dict[str, Any]:
        try:
            period = beating_period(curve)
        except DomainError:
            logger.info("fewer than two minima in the delay range; no beating period")
            return {"beating_period_ps": None, "beat_frequency_ghz": None}
        return {"beating_period_ps": period, "beat_frequency_ghz": beat_frequency_ghz(period)}

    def simulate(self, scenario: ScenarioFile) -> Dict[str, Any]:
        """Monte Carlo coincidence curve; the partial curve is still written when the pulse cap is hit"""
        prefix = scenario.output_prefix
        try:
            config = scenario.to_config()
            self._progress("Simulating", f"{len(config.delays)} delays, {config.n_start_pulses} starts each", 0)
            try:
                curve = run_experiment(config, threads=self.threads, progress_callback=self.progress_callback)
            except PulseCapExceeded as e:
                files: List[str] = []
                if e.partial_curve is not None:
                    files.append(str(write_dip_curve_csv(e.partial_curve, f"{prefix}_curve.csv")))
                    files.extend(str(p) for p in write_report(f"{prefix}_curve_meta", e.partial_curve.metadata))
                return {
                    "status": "error",
                    "error": str(e),
                    "files": files,
                    "partial": True,
                    "exit_code": EXIT_RUNTIME,
                    "suggestions": [
                        "Raise --pulse-cap",
                        "Check that the start detector can click (efficiency, dark rate, mean pair number)",
                    ],
                }

            csv_path = write_dip_curve_csv(curve, f"{prefix}_curve.csv")
            meta_paths = write_report(f"{prefix}_curve_meta", curve.metadata)
            return {
                "status": "success",
                "files": [str(csv_path)] + [str(p) for p in meta_paths],
                "summary": {
                    "points": len(curve),
                    "config_digest": curve.metadata["config_digest"],
                    "total_coincidences": float(curve.coincidences.sum()),
                },
                "exit_code": EXIT_OK,
            }
        except Exception as e:
            return self._error(e, ["Check the scenario's physical settings"])

    def fit(self, curve_path: str, out_prefix: str, bootstrap: int = 0,
            bandwidth_ghz: Optional[float] = None, seed: int = 0) -> Dict[str, Any]:
        """Fit the Gaussian dip model to a curve CSV and write the fit report"""
        try:
            self._progress("Fitting", f"reading {curve_path}", 10)
            curve = read_curve_csv(curve_path)
            result = fit_dip(curve)
            report = result.to_dict()
            text = result.to_text()
            if bootstrap > 0:
                self._progress("Fitting", f"bootstrap with {bootstrap} replicas", 50)
                spread = bootstrap_errors(curve, replicas=bootstrap, seed=seed, threads=self.threads)
                report["bootstrap"] = spread
                text += f"\nbootstrap V_err = {spread['V_err']:.3g}, sigma_err = {spread['sigma_err']:.3g} ps"
            if bandwidth_ghz is not None:
                coherence = coherence_consistency(result, bandwidth_ghz)
                report["coherence"] = asdict(coherence)
                text += (f"\ntransform-limited sigma = {coherence.sigma_theory:.4g} ps, "
                         f"z = {coherence.z_score:.3g} ({'consistent' if coherence.consistent else 'inconsistent'})")
            paths = write_report(f"{out_prefix}_fit", report, text)
            self._progress("Fitting", "report written", 100)
            if not result.converged:
                return {
                    "status": "failed",
                    "error": result.message or "fit did not converge",
                    "files": [str(p) for p in paths],
                    "summary": report,
                    "text": text,
                    "exit_code": EXIT_RUNTIME,
                    "suggestions": ["Widen the delay range so the baseline is well sampled"],
                }
            return {
                "status": "success",
                "files": [str(p) for p in paths],
                "summary": report,
                "text": text,
                "exit_code": EXIT_OK,
            }
        except Exception as e:
            return self._error(e, ["Check the curve CSV header and rows"])

    def budget(self, scenario: ScenarioFile) -> Dict[str, Any]:
        """Visibility decomposition by coincidence origin"""
        try:
            self._progress("Budget", "enumerating photon-number configurations", 10)
            budget = visibility_budget(scenario.to_config())
            table = budget.table()
            paths = write_report(f"{scenario.output_prefix}_budget", budget.to_dict(), table)
            self._progress("Budget", "done", 100)
            return {
                "status": "success",
                "files": [str(p) for p in paths],
                "summary": budget.to_dict(),
                "text": table,
                "exit_code": EXIT_OK,
            }
        except Exception as e:
            return self._error(e, ["Check the scenario's physical settings"])

    def sweep(self, scenario: ScenarioFile, parameter: Optional[str] = None,
              values: Optional[Sequence[float]] = None) -> Dict[str, Any]:
        """Simulate, fit and budget the scenario once per value of one setting"""
        try:
            parameter = parameter or scenario.sweep.parameter
            values = list(values if values is not None else scenario.sweep.values)
            if not parameter:
                raise ScenarioError("no sweep parameter given", ["sweep.parameter: required for a sweep"])
            if not values:
                raise ScenarioError("sweep value list is empty", ["sweep.values: at least one value required"])
            # resolve every override before running anything so a bad path fails fast
            variants = [with_override(scenario, parameter, value) for value in values]

            rows = []
            for index, (value, variant) in enumerate(zip(values, variants)):
                self._progress("Sweep", f"{parameter} = {value}", int(100 * index / len(values)))
                config = variant.to_config()
                curve = run_experiment(config, threads=self.threads)
                result = fit_dip(curve)
                if not result.converged:
                    logger.warning("fit at %s = %s did not converge", parameter, value)
                budget = visibility_budget(config)
                rows.append([value, result.V, result.V_err, result.sigma, result.sigma_err, budget.visibility])
                logger.info("%s = %s: V_fit = %.4f +/- %.4f, V_budget = %.4f",
                            parameter, value, result.V, result.V_err, budget.visibility)

            path = write_rows_csv(SWEEP_HEADER, rows, f"{scenario.output_prefix}_sweep.csv")
            self._progress("Sweep", "done", 100)
            return {
                "status": "success",
                "files": [str(path)],
                "summary": {"parameter": parameter, "rows": len(rows)},
                "rows": rows,
                "exit_code": EXIT_OK,
            }
        except Exception as e:
            return self._error(e, ["Run the schema command for the list of settings"])

    @staticmethod
    def _error(error: Exception, suggestions: List[str]) -> Dict[str, Any]:
        """Status dictionary for a failed command, with the exit code it maps to"""
        result: Dict[str, Any] = {"status": "error", "error": str(error), "suggestions": list(suggestions)}
        if isinstance(error, ScenarioError):
            result["diagnostics"] = list(error.diagnostics)
            result["suggestions"] = list(error.diagnostics) + result["suggestions"]
            result["exit_code"] = EXIT_INPUT
        elif isinstance(error, CurveFormatError):
            result["row"] = error.row
            result["exit_code"] = EXIT_INPUT
        elif isinstance(error, (QuadratureError, FitError, PulseCapExceeded)):
            if isinstance(error, QuadratureError):
                result["diagnostics"] = error.diagnostics
            result["exit_code"] = EXIT_RUNTIME
        elif isinstance(error, DomainError):
            result["exit_code"] = EXIT_INPUT
        elif isinstance(error, SimulationError):
            result["exit_code"] = EXIT_RUNTIME
        else:
            logger.exception("unexpected failure")
            result["exit_code"] = EXIT_RUNTIME
        return result

