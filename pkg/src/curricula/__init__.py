"""Curriculum-mixture bilingual training pipeline."""

__version__ = "0.1.0"

from .errors import ConfigError, CurriculaError, DegenerateScheduleError, RecordError
from .schedule import (DEFAULT_SCHEDULE, MixSchedule, TaskKind, TaskSchedule,
                       gamma, schedule_table, weights_at)

__all__ = [
    "ConfigError",
    "CurriculaError",
    "DegenerateScheduleError",
    "RecordError",
    "DEFAULT_SCHEDULE",
    "MixSchedule",
    "TaskKind",
    "TaskSchedule",
    "gamma",
    "schedule_table",
    "weights_at",
    "__version__",
]
