"""Exception hierarchy shared by all subpackages."""

from __future__ import annotations


class DmdFusionError(Exception):
    """Base class for every error raised by this package."""


class InvalidStateError(DmdFusionError, ValueError):
    """State vector has the wrong shape or non-finite entries."""


class SingularityError(DmdFusionError):
    """Dynamics evaluated at a singular point (e.g. at a gravitating body)."""

    def __init__(self, message: str, step: int | None = None):
        self.step = step
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)


class ImpactError(SingularityError):
    """Orbit dropped below the surface of the central body."""


class IntegrationOverflowError(DmdFusionError):
    """Integrator produced a non-finite value."""

    def __init__(self, message: str, step: int | None = None):
        self.step = step
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)


class UnsupportedOrbitError(DmdFusionError, ValueError):
    """Orbital elements outside the supported (elliptic) regime."""


class GeometryError(DmdFusionError, ValueError):
    """Observation geometry is undefined or degenerate."""


class SeriesTooShortError(DmdFusionError, ValueError):
    pass


class RankDeficiencyError(DmdFusionError):
    """A retained singular value is numerically zero."""


class NumericalError(DmdFusionError):
    """Ill-conditioned linear algebra inside the filter."""

    def __init__(self, message: str, condition_number: float | None = None):
        self.condition_number = condition_number
        super().__init__(message)


class FilterDivergenceError(DmdFusionError):
    def __init__(self, message: str, step: int):
        self.step = step
        super().__init__(f"{message} (step {step})")


class ConfigError(DmdFusionError, ValueError):
    pass


class StageError(DmdFusionError):
    """Wraps an error raised inside one stage of a scenario pipeline."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
