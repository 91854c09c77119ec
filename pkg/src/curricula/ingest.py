"""Readers for the three data-source families.

All on-disk records are UTF-8 JSON-lines. Each record is rendered into a
single training text:

* corpus lines ``{"text": ...}`` pass through unchanged,
* parallel lines ``{"src": ..., "tgt": ...}`` are spliced with a line break,
* instruction lines ``{"rounds": [{"q": ..., "a": ...}, ...]}`` are wrapped
  in the dialogue prompt template (see ``format_instruction``).
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from typing import Iterator

from .errors import ConfigError, RecordError
from .schedule import TaskKind

LOGGER = logging.getLogger(__name__)

MALFORMED_POLICIES = ("abort", "skip")


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    path: str
    task: TaskKind
    size_weight: float | None = None  # None -> on-disk byte size

    def resolved_size_weight(self) -> float:
        if self.size_weight is not None:
            if self.size_weight <= 0:
                raise ConfigError(f"dataset {self.name}: size_weight must be positive")
            return self.size_weight
        return float(os.path.getsize(self.path))


@dataclass(frozen=True)
class Instance:
    text: str
    task: TaskKind
    dataset: str
    ordinal: int


@dataclass(frozen=True)
class InstructionRecord:
    rounds: tuple[tuple[str, str], ...]

    def __post_init__(self):
        object.__setattr__(self, "rounds", tuple(tuple(r) for r in self.rounds))
        if not self.rounds:
            raise RecordError("instruction record has no rounds")
        for q, a in self.rounds:
            if not q or not a:
                raise RecordError("instruction round with empty question or answer")


def format_parallel(src: str, tgt: str) -> str:
    """Splice the two sides with a line break. Inner newlines are preserved."""
    if not src or not tgt:
        raise RecordError("parallel record with an empty side")
    return src + "\n" + tgt


def format_instruction(r: InstructionRecord) -> str:
    """Render a dialogue with the asymmetric round-1 / follow-up template.

    Round 1 uses ``User:`` / ``Bot:``; every later round is appended as
    ``### Instruction:`` / ``### Response:``. Segments are joined by single
    spaces with no trailing whitespace; the exact bytes are pinned by the
    golden file shipped in ``templates/instruction.golden``.
    """
    q1, a1 = r.rounds[0]
    parts = [f"User: {q1} Bot: {a1}"]
    for q, a in r.rounds[1:]:
        parts.append(f"### Instruction: {q} ### Response: {a}")
    return " ".join(parts)


@dataclass
class ReadStats:
    read: int = 0
    skipped: int = 0
    skipped_lines: list[int] = field(default_factory=list)


def _read_jsonl(spec: DatasetSpec, parse_record, malformed_policy: str,
                stats: ReadStats | None) -> Iterator[Instance]:
    if malformed_policy not in MALFORMED_POLICIES:
        raise ConfigError(f"unknown malformed policy {malformed_policy!r}")
    ordinal = 0
    with open(spec.path, encoding="utf-8") as fp:
        for lineno, line in enumerate(fp, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise RecordError(f"malformed JSON: {exc}", line=lineno,
                                      dataset=spec.name) from exc
                text = parse_record(obj, lineno)
            except RecordError:
                if malformed_policy == "abort":
                    raise
                if stats is not None:
                    stats.skipped += 1
                    stats.skipped_lines.append(lineno)
                LOGGER.warning("skipping malformed record %s:%d", spec.name, lineno)
                continue
            if stats is not None:
                stats.read += 1
            yield Instance(text=text, task=spec.task, dataset=spec.name, ordinal=ordinal)
            ordinal += 1


def read_corpus(spec: DatasetSpec, malformed_policy: str = "abort",
                stats: ReadStats | None = None) -> Iterator[Instance]:
    def parse(obj, lineno):
        text = obj.get("text") if isinstance(obj, dict) else None
        if not isinstance(text, str):
            raise RecordError("missing string field 'text'", line=lineno, dataset=spec.name)
        if not text:
            raise RecordError("empty text", line=lineno, dataset=spec.name)
        return text

    return _read_jsonl(spec, parse, malformed_policy, stats)


def read_parallel(spec: DatasetSpec, malformed_policy: str = "abort",
                  stats: ReadStats | None = None) -> Iterator[Instance]:
    def parse(obj, lineno):
        if not isinstance(obj, dict) or not isinstance(obj.get("src"), str) \
                or not isinstance(obj.get("tgt"), str):
            raise RecordError("expected string fields 'src' and 'tgt'",
                              line=lineno, dataset=spec.name)
        try:
            return format_parallel(obj["src"], obj["tgt"])
        except RecordError as exc:
            raise RecordError(str(exc), line=lineno, dataset=spec.name) from exc

    return _read_jsonl(spec, parse, malformed_policy, stats)


def read_instruction(spec: DatasetSpec, malformed_policy: str = "abort",
                     stats: ReadStats | None = None) -> Iterator[Instance]:
    def parse(obj, lineno):
        rounds = obj.get("rounds") if isinstance(obj, dict) else None
        if not isinstance(rounds, list):
            raise RecordError("missing list field 'rounds'", line=lineno, dataset=spec.name)
        try:
            pairs = []
            for r in rounds:
                if not isinstance(r, dict) or not isinstance(r.get("q"), str) \
                        or not isinstance(r.get("a"), str):
                    raise RecordError("round must have string fields 'q' and 'a'")
                pairs.append((r["q"], r["a"]))
            return format_instruction(InstructionRecord(tuple(pairs)))
        except RecordError as exc:
            raise RecordError(str(exc), line=lineno, dataset=spec.name) from exc

    return _read_jsonl(spec, parse, malformed_policy, stats)


_READERS = {
    TaskKind.CORPUS_EN: read_corpus,
    TaskKind.CORPUS_TARGET: read_corpus,
    TaskKind.PARALLEL: read_parallel,
    TaskKind.INSTRUCTION_EN: read_instruction,
    TaskKind.INSTRUCTION_TARGET: read_instruction,
    TaskKind.CODE: read_corpus,
}


def read_dataset(spec: DatasetSpec, malformed_policy: str = "abort",
                 stats: ReadStats | None = None) -> Iterator[Instance]:
    """Dispatch to the reader matching the dataset's task family."""
    return _READERS[spec.task](spec, malformed_policy, stats)
