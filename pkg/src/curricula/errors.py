"""Shared exception hierarchy."""


class CurriculaError(Exception):
    """Base class for all library errors."""


class ConfigError(CurriculaError):
    """Invalid configuration or schedule (maps to CLI exit code 2)."""


class RecordError(CurriculaError):
    """A single malformed input record."""

    def __init__(self, message: str, *, line: int | None = None, dataset: str | None = None):
        self.line = line
        self.dataset = dataset
        prefix = ""
        if dataset is not None:
            prefix += f"{dataset}: "
        if line is not None:
            prefix += f"line {line}: "
        super().__init__(prefix + message)


class DegenerateScheduleError(CurriculaError):
    """All task weights are zero at the requested point."""
