"""Exception hierarchy shared by every module."""

from __future__ import annotations


class IaadError(Exception):
    """Base class for simulator errors."""


class UnknownObject(IaadError, KeyError):
    pass


class TimeOutOfRange(IaadError, ValueError):
    pass


class InvalidConfig(IaadError, ValueError):
    """Bad scenario or run configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class ValidationError(InvalidConfig):
    pass


class ParseError(IaadError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class ConfigError(IaadError, ValueError):
    pass


class NonMonotonicSend(IaadError, ValueError):
    pass


class TraceExhausted(IaadError, IndexError):
    pass


class StaleFrame(IaadError, ValueError):
    pass


class InsufficientHistory(IaadError, ValueError):
    pass


class EmptyPredictionSet(IaadError, ValueError):
    pass


class HorizonExceeded(IaadError, ValueError):
    pass


class TickMismatch(IaadError, ValueError):
    pass


class FallThrough(IaadError):
    """Raised by a fusion step that cannot apply; the caller drops to the next mode."""


class BufferEmpty(FallThrough):
    pass


class StalenessExceeded(FallThrough):
    pass


class NoValidHeavyPrediction(FallThrough):
    pass


class InconsistentLog(IaadError, ValueError):
    pass


class ScenarioMismatch(IaadError, ValueError):
    pass
