"""Per-task sampling weights as a function of the training-sample counter.

Each task's weight ramps linearly from an initial fraction ``alpha`` to a
final fraction ``beta`` over the first ``t_grow`` samples, then holds at
``beta``. ``t`` counts individual samples drawn, not batches or tokens.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

from .errors import ConfigError, DegenerateScheduleError

ENDPOINT_SUM_TOL = 1e-6


class TaskKind(str, Enum):
    CORPUS_EN = "corpus_en"
    CORPUS_TARGET = "corpus_target"
    PARALLEL = "parallel"
    INSTRUCTION_EN = "instruction_en"
    INSTRUCTION_TARGET = "instruction_target"
    CODE = "code"


@dataclass(frozen=True)
class TaskSchedule:
    """Ramp endpoints for one task: initial weight alpha, final weight beta."""

    task: TaskKind
    alpha: float
    beta: float

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise ConfigError(f"{self.task.value}: alpha {self.alpha} outside [0, 1]")
        if not (0.0 <= self.beta <= 1.0):
            raise ConfigError(f"{self.task.value}: beta {self.beta} outside [0, 1]")


@dataclass(frozen=True)
class MixSchedule:
    tasks: tuple[TaskSchedule, ...]
    t_grow: int

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))
        if self.t_grow <= 0:
            raise ConfigError(f"t_grow must be positive, got {self.t_grow}")
        kinds = [s.task for s in self.tasks]
        if len(set(kinds)) != len(kinds):
            raise ConfigError("duplicate task kinds in schedule")
        if not self.tasks:
            raise ConfigError("schedule has no tasks")
        alpha_sum = sum(s.alpha for s in self.tasks)
        beta_sum = sum(s.beta for s in self.tasks)
        if abs(alpha_sum - 1.0) > ENDPOINT_SUM_TOL:
            raise ConfigError(f"alpha column sums to {alpha_sum}, expected 1")
        if abs(beta_sum - 1.0) > ENDPOINT_SUM_TOL:
            raise ConfigError(f"beta column sums to {beta_sum}, expected 1")

    @property
    def kinds(self) -> tuple[TaskKind, ...]:
        return tuple(s.task for s in self.tasks)


def gamma(s: TaskSchedule, t: int, t_grow: int) -> float:
    """Linear ramp alpha -> beta completed at t_grow, then held at beta.

    The two endpoints are exact: t=0 returns alpha and t>=t_grow returns
    beta with no floating error.
    """
    if t_grow <= 0:
        raise ConfigError(f"t_grow must be positive, got {t_grow}")
    if t < 0:
        raise ConfigError(f"t must be nonnegative, got {t}")
    if t >= t_grow:
        return s.beta
    value = s.alpha + (s.beta - s.alpha) / t_grow * t
    # Clamp only if rounding pushed the value outside [0, 1].
    if value < 0.0:
        return 0.0
    if value > 1.0:
        return 1.0
    return value


def weights_at(m: MixSchedule, t: int) -> list[float]:
    """Normalized task weight vector at sample counter t, ordered as m.tasks."""
    raw = [gamma(s, t, m.t_grow) for s in m.tasks]
    total = sum(raw)
    if total <= 0.0:
        raise DegenerateScheduleError(f"all task weights are zero at t={t}")
    return [g / total for g in raw]


def schedule_table(m: MixSchedule, n_checkpoints: int) -> list[dict]:
    """Weights at n_checkpoints evenly spaced t values covering 0 .. 2*t_grow.

    Each row is {"t": int, "weights": {task: float}}, matching the JSONL
    report format one object per line.
    """
    if n_checkpoints < 2:
        raise ConfigError(f"n_checkpoints must be >= 2, got {n_checkpoints}")
    span = 2 * m.t_grow
    rows = []
    for i in range(n_checkpoints):
        t = round(span * i / (n_checkpoints - 1))
        w = weights_at(m, t)
        rows.append({"t": t, "weights": {s.task.value: wi for s, wi in zip(m.tasks, w)}})
    return rows


def write_schedule_table(rows: list[dict], fp) -> None:
    for row in rows:
        fp.write(json.dumps(row, sort_keys=True) + "\n")


# Default endpoints for the six task families, ramp completed at 5M samples.
DEFAULT_SCHEDULE = MixSchedule(
    tasks=(
        TaskSchedule(TaskKind.CORPUS_EN, 0.60, 0.15),
        TaskSchedule(TaskKind.CORPUS_TARGET, 0.05, 0.50),
        TaskSchedule(TaskKind.PARALLEL, 0.25, 0.00),
        TaskSchedule(TaskKind.INSTRUCTION_EN, 0.05, 0.10),
        TaskSchedule(TaskKind.INSTRUCTION_TARGET, 0.00, 0.20),
        TaskSchedule(TaskKind.CODE, 0.05, 0.05),
    ),
    t_grow=5_000_000,
)
