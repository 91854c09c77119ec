"""End-to-end plumbing shared by the CLI commands and the ablation driver."""

from __future__ import annotations

import itertools
import json
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, Iterator

import numpy as np

from . import synth as synth_mod
from . import trainer as trainer_mod
from .config import PipelineConfig
from .errors import ConfigError
from .ingest import DatasetSpec, Instance, read_corpus
from .packer import PackerConfig, PackStats, pack, read_packed, write_packed
from .sampler import SamplerConfig, sample_run
from .schedule import MixSchedule, TaskKind
from .trainer import ModelConfig, TrainConfig
from .vocab import END_OF_TEXT, Vocab, base_vocab, read_vocab, tokenize, write_vocab

SAMPLES_FILE = "samples.jsonl"
PROVENANCE_FILE = "provenance.jsonl"
PACKED_FILE = "packed.bin"
PACK_STATS_FILE = "pack_stats.json"
VOCAB_FILE = "vocab.txt"
CHECKPOINT_DIR = "checkpoint"
METRICS_FILE = "metrics.jsonl"


# ---------------------------------------------------------------------------
# tokenization plumbing

class TokenCache:
    """Memoize tokenization per (dataset, ordinal); record text is fixed."""

    def __init__(self, v: Vocab):
        self.vocab = v
        self._cache: dict[tuple[str, int], list[int]] = {}

    def ids(self, inst: Instance) -> list[int]:
        key = (inst.dataset, inst.ordinal)
        ids = self._cache.get(key)
        if ids is None:
            ids = tokenize(self.vocab, inst.text)
            self._cache[key] = ids
        return ids


def tokenize_stream(instances: Iterable[Instance], v: Vocab, workers: int = 1,
                    cache: TokenCache | None = None,
                    chunk: int = 512) -> Iterator[list[int]]:
    """Tokenize an instance stream, preserving order.

    With workers > 1, chunks are tokenized on a thread pool but reassembled
    in input order, so output is identical to the single-threaded run.
    """
    if cache is not None:
        for inst in instances:
            yield cache.ids(inst)
        return
    if workers <= 1:
        for inst in instances:
            yield tokenize(v, inst.text)
        return
    it = iter(instances)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        def submit():
            block = list(itertools.islice(it, chunk))
            if not block:
                return None
            return pool.submit(lambda b: [tokenize(v, i.text) for i in b], block)

        pending = [f for f in (submit() for _ in range(workers + 1)) if f is not None]
        while pending:
            done = pending.pop(0)
            nxt = submit()
            if nxt is not None:
                pending.append(nxt)
            yield from done.result()


def load_or_create_vocab(out_dir: str) -> Vocab:
    path = os.path.join(out_dir, VOCAB_FILE)
    if os.path.exists(path):
        return read_vocab(path)
    v = base_vocab()
    os.makedirs(out_dir, exist_ok=True)
    write_vocab(path, v)
    return v


def sep_id_of(v: Vocab) -> int:
    return v.id_of(END_OF_TEXT)


# ---------------------------------------------------------------------------
# stage runners (one per CLI subcommand)

def run_gen(cfg: PipelineConfig) -> dict:
    data_dir = os.path.join(cfg.out_dir, "data")
    os.makedirs(data_dir, exist_ok=True)
    docs = cfg.synth_docs
    counts = {}
    lang_of = {
        TaskKind.CORPUS_EN: "a",
        TaskKind.CORPUS_TARGET: "b",
        TaskKind.INSTRUCTION_EN: "a",
        TaskKind.INSTRUCTION_TARGET: "b",
        TaskKind.CODE: "code",
    }
    for spec in cfg.datasets:
        n = int(docs.get(spec.name, 0))
        if n <= 0:
            raise ConfigError(f"synth.docs must give a positive count for {spec.name}")
        path = cfg.dataset_path(spec)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        if spec.task is TaskKind.PARALLEL:
            synth_mod.gen_parallel(cfg.synth, path, n)
        elif spec.task in (TaskKind.INSTRUCTION_EN, TaskKind.INSTRUCTION_TARGET):
            synth_mod.gen_instruction(cfg.synth, lang_of[spec.task], path, n)
        else:
            synth_mod.gen_corpus(cfg.synth, lang_of[spec.task], path, n)
        counts[spec.name] = n
    n_eval = int(docs.get("eval_b", 0))
    if n_eval > 0:
        synth_mod.gen_corpus(cfg.synth, "b", os.path.join(data_dir, "eval_b.jsonl"),
                             n_eval, held_out=True)
        counts["eval_b"] = n_eval
    return {"datasets": counts}


def make_sampler_config(cfg: PipelineConfig, mix: MixSchedule | None = None,
                        seed: int | None = None) -> SamplerConfig:
    return SamplerConfig(
        mix=mix if mix is not None else cfg.mix,
        datasets=cfg.resolved_datasets(),
        seed=cfg.seed if seed is None else seed,
        malformed_policy=cfg.malformed_policy,
        shuffle=cfg.shuffle,
    )


def run_sample(cfg: PipelineConfig, n: int | None = None) -> dict:
    n = cfg.n_samples if n is None else n
    os.makedirs(cfg.out_dir, exist_ok=True)
    scfg = make_sampler_config(cfg)
    samples_path = os.path.join(cfg.out_dir, SAMPLES_FILE)
    prov_path = os.path.join(cfg.out_dir, PROVENANCE_FILE)
    count = 0
    with open(samples_path, "w", encoding="utf-8", newline="\n") as sf, \
            open(prov_path, "w", encoding="utf-8", newline="\n") as pf:
        for inst in sample_run(scfg, n, provenance=pf):
            sf.write(json.dumps(
                {"text": inst.text, "task": inst.task.value,
                 "dataset": inst.dataset, "ordinal": inst.ordinal},
                ensure_ascii=False) + "\n")
            count += 1
    return {"instances": count, "samples": samples_path, "provenance": prov_path}


def read_samples(path) -> Iterator[Instance]:
    with open(path, encoding="utf-8") as fp:
        for line in fp:
            if not line.strip():
                continue
            obj = json.loads(line)
            yield Instance(text=obj["text"], task=TaskKind(obj["task"]),
                           dataset=obj["dataset"], ordinal=obj["ordinal"])


def packer_config(cfg: PipelineConfig, v: Vocab) -> PackerConfig:
    sep = sep_id_of(v)
    return PackerConfig(seq_len=cfg.seq_len, sep_id=sep,
                        flush_policy=cfg.flush_policy, pad_id=sep)


def run_pack(cfg: PipelineConfig) -> dict:
    samples_path = os.path.join(cfg.out_dir, SAMPLES_FILE)
    if not os.path.exists(samples_path):
        raise ConfigError(f"missing {samples_path}; run `curricula sample` first")
    v = load_or_create_vocab(cfg.out_dir)
    pcfg = packer_config(cfg, v)
    stats = PackStats()
    ids_stream = tokenize_stream(read_samples(samples_path), v, workers=cfg.workers)
    packed_path = os.path.join(cfg.out_dir, PACKED_FILE)
    count = write_packed(packed_path, pack(ids_stream, pcfg, stats), cfg.seq_len)
    report = stats.report(pcfg)
    with open(os.path.join(cfg.out_dir, PACK_STATS_FILE), "w", encoding="utf-8") as fp:
        json.dump(report, fp, sort_keys=True, indent=2)
        fp.write("\n")
    report["packed"] = packed_path
    assert count == report["sequences"]
    return report


def model_config(cfg: PipelineConfig, vocab_size: int, seed: int | None = None) -> ModelConfig:
    return ModelConfig(vocab_size=vocab_size,
                       context=int(cfg.model.get("context", 8)),
                       embed_dim=int(cfg.model.get("embed_dim", 32)),
                       hidden_dim=int(cfg.model.get("hidden_dim", 64)),
                       seed=cfg.seed if seed is None else seed)


def train_config(cfg: PipelineConfig, steps: int | None = None,
                 lr: float | None = None) -> TrainConfig:
    t = cfg.train
    return TrainConfig(
        steps=int(t.get("steps", 0)) if steps is None else steps,
        batch_size=int(t.get("batch_size", 32)),
        lr=float(t.get("lr", 1e-3)) if lr is None else lr,
        eval_every=int(t.get("eval_every", 0)),
    )


def _checkpoint_path(cfg: PipelineConfig) -> str:
    return os.path.join(cfg.out_dir, CHECKPOINT_DIR)


def _load_or_init_model(cfg: PipelineConfig):
    ckpt = _checkpoint_path(cfg)
    if os.path.exists(os.path.join(ckpt, "meta.json")):
        return trainer_mod.load_checkpoint(ckpt)
    v = load_or_create_vocab(cfg.out_dir)
    mcfg = model_config(cfg, len(v))
    return mcfg, trainer_mod.init_params(mcfg), v


def run_extend(cfg: PipelineConfig, new_tokens: list[str] | None = None) -> dict:
    mcfg, params, v = _load_or_init_model(cfg)
    if new_tokens is None:
        new_tokens = synth_mod.target_alphabet(cfg.synth)
    params2, v2 = trainer_mod.extend_params(params, v, new_tokens)
    mcfg2 = ModelConfig(vocab_size=len(v2), context=mcfg.context,
                        embed_dim=mcfg.embed_dim, hidden_dim=mcfg.hidden_dim,
                        seed=mcfg.seed)
    trainer_mod.save_checkpoint(_checkpoint_path(cfg), mcfg2, params2, v2)
    write_vocab(os.path.join(cfg.out_dir, VOCAB_FILE), v2)
    return {"vocab_size": len(v2), "appended": len(v2) - len(v),
            "checkpoint": _checkpoint_path(cfg)}


def run_train(cfg: PipelineConfig) -> dict:
    packed_path = os.path.join(cfg.out_dir, PACKED_FILE)
    if not os.path.exists(packed_path):
        raise ConfigError(f"missing {packed_path}; run `curricula pack` first")
    mcfg, params, v = _load_or_init_model(cfg)
    packed = read_packed(packed_path)
    if packed.size and int(packed.max()) >= len(v):
        raise ConfigError("packed file contains ids outside the model vocabulary")
    tcfg = train_config(cfg)
    metrics_path = os.path.join(cfg.out_dir, METRICS_FILE)
    with open(metrics_path, "w", encoding="utf-8", newline="\n") as fp:
        params, metrics = trainer_mod.train(mcfg, tcfg, packed, sep_id_of(v),
                                            params=params, metrics_fp=fp)
    trainer_mod.save_checkpoint(_checkpoint_path(cfg), mcfg, params, v)
    final = metrics[-1]["train_loss"] if metrics else None
    return {"steps": tcfg.steps, "final_loss": final, "metrics": metrics_path,
            "checkpoint": _checkpoint_path(cfg)}


def run_eval(cfg: PipelineConfig, packed_path: str | None = None) -> dict:
    ckpt = _checkpoint_path(cfg)
    if not os.path.exists(os.path.join(ckpt, "meta.json")):
        raise ConfigError(f"missing checkpoint in {ckpt}; run `curricula train` first")
    mcfg, params, v = trainer_mod.load_checkpoint(ckpt)
    if packed_path is None:
        packed_path = os.path.join(cfg.out_dir, PACKED_FILE)
    if not os.path.exists(packed_path):
        raise ConfigError(f"missing eval file {packed_path}")
    packed = read_packed(packed_path)
    ppl = trainer_mod.eval_ppl(params, packed, sep_id_of(v))
    return {"eval_file": packed_path, "sequences": int(packed.shape[0]),
            "perplexity": ppl}


# ---------------------------------------------------------------------------
# corpus -> packed helper used by pretraining and eval-set construction

def pack_corpus_file(path, v: Vocab, pcfg: PackerConfig,
                     task: TaskKind = TaskKind.CORPUS_EN) -> np.ndarray:
    spec = DatasetSpec(name=os.path.basename(str(path)), path=str(path), task=task)
    ids_stream = (tokenize(v, inst.text) for inst in read_corpus(spec))
    seqs = list(pack(ids_stream, pcfg))
    if not seqs:
        raise ConfigError(f"{path}: no packed sequences (file too small for L={pcfg.seq_len})")
    return np.asarray(seqs, dtype=np.int64)
