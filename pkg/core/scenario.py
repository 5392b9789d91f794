"""
Scenario Files
Schema-validated JSON scenarios and their translation into an ExperimentConfig
"""
import json
import math
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ScenarioError
from .hom import DipModel
from .montecarlo import DEFAULT_PULSE_CAP, DetectorSpec, ExperimentConfig, TiaSpec
from .pair_source import SourceSpec
from .sfg_converter import ConverterSpec


def _unit(unit: str) -> Dict[str, Any]:
    return {"unit": unit}


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SourceModel(_Strict):
    """SFWM pair source and channel filters"""
    pump_wavelength_nm: float = Field(1551.1, gt=0, json_schema_extra=_unit("nm"))
    pump_pulse_fwhm_ps: float = Field(100.0, gt=0, json_schema_extra=_unit("ps"))
    mean_pairs_per_pulse: float = Field(0.05, ge=0, json_schema_extra=_unit("pairs/pulse"))
    signal_center_thz: float = Field(193.676, gt=0, json_schema_extra=_unit("THz"))
    idler_center_thz: float = Field(192.879, gt=0, json_schema_extra=_unit("THz"))
    channel_fwhm_ghz: float = Field(25.0, gt=0, json_schema_extra=_unit("GHz"))
    raman_mean_signal: Optional[float] = Field(
        None, ge=0, description="defaults to mean_pairs_per_pulse", json_schema_extra=_unit("photons/pulse"))
    raman_mean_idler: Optional[float] = Field(
        None, ge=0, description="defaults to mean_pairs_per_pulse", json_schema_extra=_unit("photons/pulse"))
    timing_jitter_sigma_ps: float = Field(0.0, ge=0, json_schema_extra=_unit("ps"))
    pair_statistics: Literal["poisson", "thermal"] = "poisson"

    def to_spec(self) -> SourceSpec:
        return SourceSpec(
            pump_wavelength=self.pump_wavelength_nm,
            pump_pulse_fwhm=self.pump_pulse_fwhm_ps,
            mean_pairs_per_pulse=self.mean_pairs_per_pulse,
            signal_center=self.signal_center_thz,
            idler_center=self.idler_center_thz,
            channel_fwhm=self.channel_fwhm_ghz,
            raman_mean_signal=self.raman_mean_signal,
            raman_mean_idler=self.raman_mean_idler,
            timing_jitter_sigma=self.timing_jitter_sigma_ps,
            pair_statistics=self.pair_statistics,
        )


class ConverterModel(_Strict):
    """One up-converter; response_fwhm_ghz may be "inf" for a flat response"""
    pump_frequency_thz: float = Field(ge=0, json_schema_extra=_unit("THz"))
    peak_efficiency: float = Field(0.02, ge=0, le=1, json_schema_extra=_unit("1"))
    response_center_thz: float = Field(gt=0, json_schema_extra=_unit("THz"))
    response_fwhm_ghz: float = Field(40.0, gt=0, json_schema_extra=_unit("GHz"))
    noise_rate_cps: float = Field(1900.0, ge=0, json_schema_extra=_unit("counts/s"))
    pump_power_mw: float = Field(0.0, ge=0, json_schema_extra=_unit("mW"))
    ripple_depth: float = Field(0.0, ge=0, lt=1, json_schema_extra=_unit("1"))
    ripple_period_ghz: float = Field(10.0, gt=0, json_schema_extra=_unit("GHz"))

    @field_validator("response_fwhm_ghz", mode="before")
    @classmethod
    def _flat_response(cls, value):
        if isinstance(value, str) and value.strip().lower() in ("inf", "infinity"):
            return math.inf
        return value

    def to_spec(self) -> ConverterSpec:
        return ConverterSpec(
            pump_frequency=self.pump_frequency_thz,
            peak_efficiency=self.peak_efficiency,
            response_center=self.response_center_thz,
            response_fwhm=self.response_fwhm_ghz,
            noise_rate=self.noise_rate_cps,
            pump_power_mw=self.pump_power_mw,
            ripple_depth=self.ripple_depth,
            ripple_period=self.ripple_period_ghz,
        )


class DetectorModel(_Strict):
    efficiency: float = Field(0.6, ge=0, le=1, json_schema_extra=_unit("1"))
    dark_rate_cps: float = Field(100.0, ge=0, json_schema_extra=_unit("counts/s"))


class TiaModel(_Strict):
    coincidence_window_ns: float = Field(1.0, gt=0, json_schema_extra=_unit("ns"))
    start_detector: Literal[1, 2] = 1


class DelayGrid(_Strict):
    """Inclusive evenly spaced delays"""
    start_ps: float = Field(json_schema_extra=_unit("ps"))
    stop_ps: float = Field(json_schema_extra=_unit("ps"))
    step_ps: float = Field(gt=0, json_schema_extra=_unit("ps"))

    @model_validator(mode="after")
    def _ordered(self):
        if self.stop_ps < self.start_ps:
            raise ValueError("stop_ps must not be below start_ps")
        return self

    def values(self) -> List[float]:
        count = int(math.floor((self.stop_ps - self.start_ps) / self.step_ps + 1e-9)) + 1
        return [round(self.start_ps + i * self.step_ps, 9) for i in range(count)]


class ModelParameters(_Strict):
    C: float = Field(1.0, ge=0, json_schema_extra=_unit("counts"))
    V: float = Field(1.0, ge=0, le=1, json_schema_extra=_unit("1"))
    sigma_ps: float = Field(10.6, gt=0, json_schema_extra=_unit("ps"))


class AnalyticOptions(_Strict):
    """How cmd_analytic builds its curve"""
    generator: Literal["separable", "joint", "model"] = "separable"
    converted: bool = Field(True, description="separable: use the up-converted photons instead of the source photons")
    model: ModelParameters = Field(default_factory=ModelParameters)


class SweepOptions(_Strict):
    parameter: Optional[str] = Field(None, description="dotted path, e.g. source.mean_pairs_per_pulse")
    values: List[float] = Field(default_factory=list)


def _signal_converter() -> ConverterModel:
    return ConverterModel(pump_frequency_thz=226.477, response_center_thz=193.676, pump_power_mw=4.9)


def _idler_converter() -> ConverterModel:
    return ConverterModel(pump_frequency_thz=227.274, response_center_thz=192.879, pump_power_mw=12.8)


class ScenarioFile(_Strict):
    """Complete scenario: the experiment plus what to do with it"""
    mode: Literal["analytic", "simulate", "fit", "budget", "sweep"] = "simulate"
    output_prefix: str = "out/reference_setup"
    source: SourceModel = Field(default_factory=SourceModel)
    converter_signal: ConverterModel = Field(default_factory=_signal_converter)
    converter_idler: ConverterModel = Field(default_factory=_idler_converter)
    detectors: Tuple[DetectorModel, DetectorModel] = Field(default_factory=lambda: (DetectorModel(), DetectorModel()))
    tia: TiaModel = Field(default_factory=TiaModel)
    repetition_rate_mhz: float = Field(100.0, gt=0, json_schema_extra=_unit("MHz"))
    n_start_pulses: int = Field(500_000, gt=0, json_schema_extra=_unit("counts"))
    delays_ps: Optional[List[float]] = Field(None, json_schema_extra=_unit("ps"))
    delay_grid: Optional[DelayGrid] = None
    rng_seed: int = 42
    distinguishability_overlap: float = Field(1.0, ge=0, le=1, json_schema_extra=_unit("1"))
    pulse_cap: int = Field(DEFAULT_PULSE_CAP, gt=0, json_schema_extra=_unit("pulses"))
    analytic: AnalyticOptions = Field(default_factory=AnalyticOptions)
    sweep: SweepOptions = Field(default_factory=SweepOptions)

    @model_validator(mode="after")
    def _delays(self):
        if self.delays_ps is not None and self.delay_grid is not None:
            raise ValueError("give either delays_ps or delay_grid, not both")
        delays = self.delay_values()
        if not delays:
            raise ValueError("delay list must not be empty")
        if any(b <= a for a, b in zip(delays, delays[1:])):
            raise ValueError("delays must be strictly increasing")
        return self

    def delay_values(self) -> List[float]:
        if self.delay_grid is not None:
            return self.delay_grid.values()
        if self.delays_ps is not None:
            return list(self.delays_ps)
        return [float(d) for d in range(-40, 41, 4)]

    def to_config(self) -> ExperimentConfig:
        return ExperimentConfig(
            source=self.source.to_spec(),
            converter_signal=self.converter_signal.to_spec(),
            converter_idler=self.converter_idler.to_spec(),
            detectors=tuple(DetectorSpec(efficiency=d.efficiency, dark_rate=d.dark_rate_cps) for d in self.detectors),
            tia=TiaSpec(coincidence_window=self.tia.coincidence_window_ns, start_detector=self.tia.start_detector),
            repetition_rate=self.repetition_rate_mhz,
            n_start_pulses=self.n_start_pulses,
            delays=tuple(self.delay_values()),
            rng_seed=self.rng_seed,
            distinguishability_overlap=self.distinguishability_overlap,
            pulse_cap=self.pulse_cap,
        )

    def dip_model(self) -> DipModel:
        m = self.analytic.model
        return DipModel(C=m.C, V=m.V, sigma=m.sigma_ps)


def _format_errors(error: ValidationError) -> List[str]:
    diagnostics = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "<root>"
        diagnostics.append(f"{location}: {item['msg']}")
    return diagnostics


def parse_scenario(data: Union[str, Dict[str, Any]], source: str = "<scenario>") -> ScenarioFile:
    """Validate a scenario given as JSON text or an already-decoded mapping"""
    if isinstance(data, str):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as e:
            raise ScenarioError(f"{source}: invalid JSON", [f"line {e.lineno}, column {e.colno}: {e.msg}"])
    if not isinstance(data, dict):
        raise ScenarioError(f"{source}: top level must be an object", ["<root>: expected an object"])
    try:
        return ScenarioFile.model_validate(data)
    except ValidationError as e:
        raise ScenarioError(f"{source}: schema validation failed", _format_errors(e))


def load_scenario(path: Union[str, Path]) -> ScenarioFile:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioError(f"cannot read scenario {path}", [str(e)])
    return parse_scenario(text, source=str(path))


def scenario_schema() -> Dict[str, Any]:
    return ScenarioFile.model_json_schema()


def _numeric_paths(model: BaseModel, prefix: str = "") -> List[str]:
    paths = []
    for name, value in model:
        path = f"{prefix}{name}"
        if isinstance(value, BaseModel):
            if name in ("analytic", "sweep"):
                continue
            paths.extend(_numeric_paths(value, path + "."))
        elif isinstance(value, tuple) and value and isinstance(value[0], BaseModel):
            for index, item in enumerate(value):
                paths.extend(_numeric_paths(item, f"{path}.{index}."))
        elif isinstance(value, bool) or isinstance(value, str):
            continue
        elif isinstance(value, (int, float)) or (value is None and name.startswith("raman_")):
            paths.append(path)
    return paths


_NOT_SWEEPABLE = ("rng_seed", "pulse_cap", "tia.start_detector")


def sweepable_parameters(scenario: ScenarioFile) -> List[str]:
    """Dotted paths of every numeric physical setting"""
    return [p for p in _numeric_paths(scenario) if p not in _NOT_SWEEPABLE]


def with_override(scenario: ScenarioFile, path: str, value: Any) -> ScenarioFile:
    """Copy of the scenario with one dotted-path setting replaced (re-validated)"""
    valid = sweepable_parameters(scenario)
    if path not in valid:
        raise ScenarioError(f"unknown parameter path {path!r}", [f"valid paths: {', '.join(valid)}"])
    data = scenario.model_dump()
    parts = path.split(".")
    target = data
    for part in parts[:-1]:
        target = target[int(part)] if isinstance(target, (list, tuple)) else target[part]
    if isinstance(target, tuple):
        raise ScenarioError(f"cannot override {path!r}")
    target[parts[-1]] = value
    return parse_scenario(data, source=f"override {path}={value}")
