"""
Simulation Errors
Exception types raised by the core modules
"""
from typing import Any, Dict, Optional


class SimulationError(Exception):
    """Base class for everything the simulator raises on purpose"""


class DomainError(SimulationError, ValueError):
    """A physical input is outside the range the model is defined on"""


class QuadratureError(SimulationError):
    """Numerical integration did not converge within the allowed grid sizes"""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class PulseCapExceeded(SimulationError):
    """The start detector never reached the requested count within the pulse cap"""

    def __init__(self, message: str, partial_curve: Any = None):
        super().__init__(message)
        self.partial_curve = partial_curve


class FitError(SimulationError):
    """The input curve cannot be fitted at all (too few points, no baseline)"""


class ScenarioError(SimulationError):
    """Scenario file could not be read or failed schema validation"""

    def __init__(self, message: str, diagnostics: Optional[list] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class CurveFormatError(SimulationError):
    """A dip-curve CSV does not match the expected layout"""

    def __init__(self, message: str, row: Optional[int] = None):
        super().__init__(message)
        self.row = row
