"""Exception hierarchy shared across the pipeline."""


class NewsGraphError(Exception):
    """Base class for all package errors."""


class DomainError(NewsGraphError, ValueError):
    """An argument lies outside the domain of an operation."""


class RangeError(NewsGraphError, IndexError):
    """A date or index falls outside the available range."""


class SchemaError(NewsGraphError):
    """An input file does not match its documented schema."""


class RowError(NewsGraphError):
    """A single input row/record is invalid.

    Carries the 1-based line number of the offending row.
    """

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(where + message)


class ConfigError(NewsGraphError):
    """Invalid or inconsistent configuration."""


class ParseError(NewsGraphError):
    """An LLM response could not be parsed; keeps the raw text."""

    def __init__(self, message: str, raw: str = ""):
        self.raw = raw
        super().__init__(f"{message}: {raw[:200]!r}")


class ProviderError(NewsGraphError):
    """The LLM provider failed after all retries."""


class CacheMissError(NewsGraphError):
    """Replay mode was asked for a response that is not in the cache."""

    def __init__(self, message: str, dates=()):
        self.dates = list(dates)
        super().__init__(message)


class ShapeError(NewsGraphError, ValueError):
    """Tensor shapes are incompatible."""


class NumericError(NewsGraphError, FloatingPointError):
    """A non-finite value was produced where a finite one is required."""


class UsageError(NewsGraphError):
    """An API was called in the wrong state (e.g. optimizer step without grads)."""


class TrainingError(NewsGraphError):
    """Training diverged."""


class DataError(NewsGraphError):
    """Required data is missing (e.g. no realized return for a held ticker)."""


class StaleArtifactError(NewsGraphError):
    """An upstream artifact changed after a downstream artifact was built from it."""
