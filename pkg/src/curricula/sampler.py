"""Dynamic data sampler.

Each sample draws a task from the schedule's weights at the current sample
counter t, then a dataset within that task proportional to size_weight, and
yields that dataset's next record (sequential cursor, wrapping at end of
file). Draw discipline is fixed: exactly two RNG outputs are consumed per
sample (task draw, then dataset draw), so streams replay bit-for-bit from
(algorithm id, seed). Adding a draw site is a breaking format change.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterator, TextIO

from . import rng as rng_mod
from .errors import ConfigError, CurriculaError
from .ingest import DatasetSpec, Instance, read_dataset
from .rng import Xoshiro256StarStar
from .schedule import MixSchedule, TaskKind, weights_at

DRAWS_PER_SAMPLE = 2


@dataclass(frozen=True)
class SamplerConfig:
    mix: MixSchedule
    datasets: tuple[DatasetSpec, ...]
    seed: int
    malformed_policy: str = "abort"
    shuffle: bool = False  # epoch-keyed deterministic shuffle of record order

    def __post_init__(self):
        object.__setattr__(self, "datasets", tuple(self.datasets))
        covered = {d.task for d in self.datasets}
        for s in self.mix.tasks:
            if (s.alpha > 0 or s.beta > 0) and s.task not in covered:
                raise ConfigError(f"task {s.task.value} has nonzero weight but no dataset")


class _DatasetCursor:
    """Sequential reader over one dataset's formatted records, wrapping per epoch."""

    def __init__(self, spec: DatasetSpec, malformed_policy: str):
        self.spec = spec
        self.records: list[Instance] = list(read_dataset(spec, malformed_policy))
        if not self.records:
            raise ConfigError(f"dataset {spec.name} is empty")
        self.weight = spec.resolved_size_weight()
        self.pos = 0
        self.epoch = 0
        self._order = list(range(len(self.records)))

    def _reshuffle(self, seed: int) -> None:
        # Fisher-Yates driven by a per-(seed, dataset, epoch) SplitMix64 stream.
        name_key = int.from_bytes(hashlib.sha256(self.spec.name.encode()).digest()[:8], "little")
        state = (seed ^ name_key ^ (self.epoch * 0x9E3779B97F4A7C15)) & ((1 << 64) - 1)
        order = list(range(len(self.records)))
        for i in range(len(order) - 1, 0, -1):
            state, out = rng_mod.splitmix64_next(state)
            j = out % (i + 1)
            order[i], order[j] = order[j], order[i]
        self._order = order

    def next(self, shuffle: bool, seed: int) -> Instance:
        if self.pos == 0 and shuffle:
            self._reshuffle(seed)
        inst = self.records[self._order[self.pos]]
        self.pos += 1
        if self.pos == len(self.records):
            self.pos = 0
            self.epoch += 1
        return inst


@dataclass
class SamplerState:
    t: int
    rng: Xoshiro256StarStar
    cursors: dict[str, _DatasetCursor]
    by_task: dict[TaskKind, list[_DatasetCursor]] = field(default_factory=dict)


def make_state(cfg: SamplerConfig) -> SamplerState:
    cursors = {d.name: _DatasetCursor(d, cfg.malformed_policy) for d in cfg.datasets}
    by_task: dict[TaskKind, list[_DatasetCursor]] = {}
    for d in cfg.datasets:
        by_task.setdefault(d.task, []).append(cursors[d.name])
    return SamplerState(t=0, rng=Xoshiro256StarStar(cfg.seed), cursors=cursors,
                        by_task=by_task)


def _multinomial(u: float, weights: list[float]) -> int:
    acc = 0.0
    for i, w in enumerate(weights):
        acc += w
        if u < acc:
            return i
    # u can exceed the accumulated sum only by rounding; take the last
    # nonzero-weight category.
    for i in range(len(weights) - 1, -1, -1):
        if weights[i] > 0:
            return i
    raise ConfigError("multinomial over all-zero weights")


def next_task(state: SamplerState, m: MixSchedule) -> TaskKind:
    """Draw a task from weights_at(m, state.t); consumes one RNG output."""
    w = weights_at(m, state.t)
    idx = _multinomial(state.rng.random(), w)
    return m.tasks[idx].task


def next_instance(state: SamplerState, cfg: SamplerConfig) -> Instance:
    """Draw task then dataset, yield that dataset's next record, advance t."""
    task = next_task(state, cfg.mix)
    cursors = state.by_task.get(task)
    if not cursors:
        raise ConfigError(f"no dataset registered for task {task.value}")
    weights = [c.weight for c in cursors]
    total = sum(weights)
    idx = _multinomial(state.rng.random(), [w / total for w in weights])
    cursor = cursors[idx]
    try:
        inst = cursor.next(cfg.shuffle, cfg.seed)
    except OSError as exc:
        raise CurriculaError(
            f"dataset {cursor.spec.name} unreadable at cursor {cursor.pos}: {exc}") from exc
    state.t += 1
    return inst


def write_provenance_header(fp: TextIO, cfg: SamplerConfig) -> None:
    header = {"rng": rng_mod.ALGORITHM_ID, "seed": cfg.seed, "t_grow": cfg.mix.t_grow}
    fp.write(json.dumps(header, sort_keys=True) + "\n")


def sample_run(cfg: SamplerConfig, n: int,
               provenance: TextIO | None = None) -> Iterator[Instance]:
    """Yield exactly n sampled Instances, optionally logging provenance JSONL."""
    if n < 0:
        raise ConfigError(f"sample count must be nonnegative, got {n}")
    state = make_state(cfg)
    if provenance is not None:
        write_provenance_header(provenance, cfg)
    for _ in range(n):
        t = state.t
        inst = next_instance(state, cfg)
        if provenance is not None:
            provenance.write(json.dumps(
                {"t": t, "task": inst.task.value, "dataset": inst.dataset,
                 "ordinal": inst.ordinal}, sort_keys=True) + "\n")
        yield inst
