"""
Error Types
===========

Exception hierarchy shared by every module:
- Case parsing and validation failures
- Numerical failures (equilibrium, integration, filtering, training)
- Lookup failures (channels, scenarios)
- Configuration failures raised before any computation starts
"""

from typing import List, Optional


class LaaIdentError(Exception):
    """Base class for all package errors"""


class CaseFormatError(LaaIdentError, ValueError):
    """Case file could not be parsed"""

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class CaseValidationError(LaaIdentError, ValueError):
    """Case data violates a model invariant"""

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class EquilibriumError(LaaIdentError):
    """Root-finder failed to balance the grid"""

    def __init__(self, message: str, iterations: int = 0, residual: float = float("nan")):
        self.iterations = iterations
        self.residual = residual
        super().__init__(message)


class AttackConfigError(LaaIdentError, ValueError):
    """Attack definition inconsistent with the grid"""


class IntegrationError(LaaIdentError):
    """Adaptive integrator could not continue"""

    def __init__(self, message: str, time: float):
        self.time = time
        super().__init__(f"{message} (t = {time:.6g} s)")


class BudgetUnavailableError(LaaIdentError):
    """Vulnerable load is not known for the case"""


class WindowError(LaaIdentError, ValueError):
    """Sampling window or rate outside the allowed range"""


class MissingChannelError(LaaIdentError, KeyError):
    """Measurement set lacks a required bus"""

    def __init__(self, bus: int, channel: str = "angle"):
        self.bus = bus
        self.channel = channel
        super().__init__(f"no {channel} channel for bus {bus}")

    def __str__(self) -> str:
        return self.args[0]


class UnsupportedOperationError(LaaIdentError):
    """Autodiff requested through a non-differentiable path"""


class TrainingDivergedError(LaaIdentError):
    """PINN loss became non-finite"""

    def __init__(self, message: str, trace: Optional[List] = None):
        self.trace = trace or []
        super().__init__(message)


class UkfError(LaaIdentError):
    """Covariance factorization failed"""

    def __init__(self, message: str, step: int):
        self.step = step
        super().__init__(f"{message} (step {step})")


class MetricError(LaaIdentError, ValueError):
    """Metric undefined for the given inputs"""


class ScenarioError(LaaIdentError, KeyError):
    """Unknown scenario id"""

    def __str__(self) -> str:
        return self.args[0] if self.args else ""


class ConfigError(LaaIdentError, ValueError):
    """Invalid run configuration"""
