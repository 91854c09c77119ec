"""Deterministic synthetic bilingual corpora for desk-scale experiments.

Two surface languages share one latent order-2 Markov chain over symbol
classes; language "a" renders classes as ASCII lowercase letters, language
"b" as Greek letters from a disjoint Unicode block (multi-byte in UTF-8, so
they are genuinely absent from a byte-level base vocabulary), and "code" as
digits/punctuation. Corpus documents of both languages with the same seed
carry identical latent sequences, parallel records render one latent
sequence in both languages, and instruction records pose copy/reverse/last
tasks whose answers are exactly recomputable. Every generator is a pure
function of (seed, stream, index).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

LANGS = ("a", "b", "code")

# latent stream ids (part of the on-disk contract: changing one reshuffles data)
_STREAM_CHAIN = 0
_STREAM_CORPUS = 1
_STREAM_PARALLEL = 2
_STREAM_EVAL = 3
_STREAM_INSTR = {"a": 4, "b": 5}

_INSTR_TASKS = ("copy", "reverse", "last")


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    n_classes: int = 12
    doc_len_min: int = 30
    doc_len_max: int = 80
    chain_concentration: float = 0.3  # Dirichlet parameter; lower = peakier rows

    def __post_init__(self):
        if not (2 <= self.n_classes <= 22):
            raise ConfigError("n_classes must be in [2, 22]")
        if not (2 <= self.doc_len_min <= self.doc_len_max):
            raise ConfigError("invalid doc length range")


def _rng(cfg: SynthConfig, stream: int, index: int) -> np.random.Generator:
    return np.random.default_rng([cfg.seed & 0x7FFFFFFF, stream, index])


def build_chain(cfg: SynthConfig) -> np.ndarray:
    """Order-2 transition tensor P[c2, c1, c]; every row sums to 1."""
    rng = _rng(cfg, _STREAM_CHAIN, 0)
    c = cfg.n_classes
    p = rng.dirichlet(np.full(c, cfg.chain_concentration), size=(c, c))
    return p


def class_to_char(lang: str, cls: int) -> str:
    if lang == "a":
        return chr(ord("a") + cls)
    if lang == "b":
        return chr(0x3B1 + cls)  # Greek small letters, 2-byte UTF-8
    if lang == "code":
        return chr(ord("0") + cls)
    raise ConfigError(f"unknown language {lang!r}")


def char_to_class(lang: str, ch: str) -> int:
    base = {"a": ord("a"), "b": 0x3B1, "code": ord("0")}[lang]
    return ord(ch) - base


def render(classes, lang: str) -> str:
    return "".join(class_to_char(lang, int(c)) for c in classes)


def target_alphabet(cfg: SynthConfig, lang: str = "b") -> list[str]:
    """The surface characters of a language, in class order."""
    return [class_to_char(lang, i) for i in range(cfg.n_classes)]


def _sample_latent(rng: np.random.Generator, chain_cum: np.ndarray, length: int,
                   n_classes: int) -> np.ndarray:
    classes = np.empty(length, dtype=np.int64)
    classes[0] = rng.integers(n_classes)
    if length > 1:
        classes[1] = rng.integers(n_classes)
    for i in range(2, length):
        u = rng.random()
        # rounding in the cumulative row can leave its last entry below 1
        classes[i] = min(
            int(np.searchsorted(chain_cum[classes[i - 2], classes[i - 1]], u, side="right")),
            n_classes - 1)
    return classes


def latent_doc(cfg: SynthConfig, stream: int, index: int,
               chain_cum: np.ndarray) -> np.ndarray:
    rng = _rng(cfg, stream, index)
    length = int(rng.integers(cfg.doc_len_min, cfg.doc_len_max + 1))
    return _sample_latent(rng, chain_cum, length, cfg.n_classes)


def _chain_cum(cfg: SynthConfig) -> np.ndarray:
    return np.cumsum(build_chain(cfg), axis=-1)


def gen_corpus(cfg: SynthConfig, lang: str, path, n_docs: int,
               index_offset: int = 0, held_out: bool = False) -> int:
    """Write a JSONL corpus; documents indexed from index_offset.

    With the same seed, languages render identical latent sequences; set
    held_out=True to draw from a separate latent stream for eval data.
    """
    cum = _chain_cum(cfg)
    stream = _STREAM_EVAL if held_out else _STREAM_CORPUS
    with open(path, "w", encoding="utf-8", newline="\n") as fp:
        for i in range(n_docs):
            classes = latent_doc(cfg, stream, index_offset + i, cum)
            fp.write(json.dumps({"text": render(classes, lang)}, ensure_ascii=False) + "\n")
    return n_docs


def gen_parallel(cfg: SynthConfig, path, n_records: int, index_offset: int = 0) -> int:
    """Write JSONL records rendering one latent sequence in both languages."""
    cum = _chain_cum(cfg)
    with open(path, "w", encoding="utf-8", newline="\n") as fp:
        for i in range(n_records):
            classes = latent_doc(cfg, _STREAM_PARALLEL, index_offset + i, cum)
            rec = {"src": render(classes, "a"), "tgt": render(classes, "b")}
            fp.write(json.dumps(rec, ensure_ascii=False) + "\n")
    return n_records


def instruction_answer(task: str, payload: str) -> str:
    if task == "copy":
        return payload
    if task == "reverse":
        return payload[::-1]
    if task == "last":
        return payload[-1]
    raise ConfigError(f"unknown instruction task {task!r}")


def gen_instruction(cfg: SynthConfig, lang: str, path, n_records: int) -> int:
    """Write JSONL dialogues with templated questions and computable answers."""
    if lang not in _STREAM_INSTR:
        raise ConfigError(f"instruction language must be one of {tuple(_STREAM_INSTR)}")
    cum = _chain_cum(cfg)
    with open(path, "w", encoding="utf-8", newline="\n") as fp:
        for i in range(n_records):
            rng = _rng(cfg, _STREAM_INSTR[lang], i)
            n_rounds = int(rng.integers(1, 4))
            rounds = []
            for _ in range(n_rounds):
                task = _INSTR_TASKS[int(rng.integers(len(_INSTR_TASKS)))]
                length = int(rng.integers(5, 16))
                payload = render(_sample_latent(rng, cum, length, cfg.n_classes), lang)
                rounds.append({"q": f"{task} {payload}",
                               "a": instruction_answer(task, payload)})
            fp.write(json.dumps({"rounds": rounds}, ensure_ascii=False) + "\n")
    return n_records


def validate_instruction_file(path) -> tuple[int, int]:
    """Re-derive every answer from its question; returns (checked, mismatches)."""
    checked = 0
    bad = 0
    with open(path, encoding="utf-8") as fp:
        for line in fp:
            if not line.strip():
                continue
            rec = json.loads(line)
            for rnd in rec["rounds"]:
                task, _, payload = rnd["q"].partition(" ")
                checked += 1
                if instruction_answer(task, payload) != rnd["a"]:
                    bad += 1
    return checked, bad
