from __future__ import annotations


class VolterraError(RuntimeError):
    pass


class ConfigError(VolterraError, ValueError):
    pass


class ExpressionError(VolterraError, ValueError):
    pass


class InvalidKernelError(VolterraError, ValueError):
    pass


class UnsupportedKernelError(VolterraError):
    pass


class HypothesisError(VolterraError, ValueError):
    pass


class SingularIntegrandError(VolterraError):
    pass


class OutOfRangeError(VolterraError, ValueError):
    pass


class DomainGuardError(VolterraError, ValueError):
    pass


class InsufficientHorizonError(VolterraError):
    pass


class StepFailureError(VolterraError):
    def __init__(self, time: float, msg: str = "") -> None:
        self.time = float(time)
        super().__init__(msg or f"implicit step failed to converge at t={self.time:g}")
