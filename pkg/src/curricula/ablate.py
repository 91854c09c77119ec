"""Dynamic-sampler ablation at desk scale.

Protocol: pretrain a small model on language-A text only, extend its
vocabulary with the target-language characters (mean-initialized rows),
then continue training twice with identical seeds, budgets, and model --
once with the dynamic mixture schedule and once with a fixed mixture equal
to the schedule's final (beta) column. Both arms are scored on early-window
training loss and held-out target-language perplexity, across several seeds.

Outputs under <out_dir>/ablate/: per-run metrics JSONL, report.json,
report.csv, and matplotlib figures.
"""

from __future__ import annotations

import csv
import json
import os

import numpy as np

from . import synth as synth_mod
from . import trainer as trainer_mod
from .config import PipelineConfig
from .errors import ConfigError
from .packer import PackerConfig, pack
from .pipeline import (TokenCache, make_sampler_config, model_config,
                       pack_corpus_file, run_gen, sep_id_of)
from .sampler import sample_run
from .schedule import MixSchedule, TaskKind, TaskSchedule
from .trainer import TrainConfig
from .vocab import base_vocab, extend_vocab

ARMS = ("dynamic", "fixed")


def fixed_mix(mix: MixSchedule, t_grow: int) -> MixSchedule:
    """The ablation baseline: the beta column held constant for all t."""
    return MixSchedule(
        tasks=tuple(TaskSchedule(s.task, s.beta, s.beta) for s in mix.tasks),
        t_grow=t_grow)


def scaled_mix(mix: MixSchedule, t_grow: int) -> MixSchedule:
    return MixSchedule(tasks=mix.tasks, t_grow=t_grow)


def _window_mean(losses: list[float], fraction: float, tail: bool) -> float:
    n = max(1, int(len(losses) * fraction))
    window = losses[-n:] if tail else losses[:n]
    return float(np.mean(window))


def _packed_for_arm(cfg: PipelineConfig, mix: MixSchedule, seed: int,
                    n_samples: int, cache: TokenCache,
                    pcfg: PackerConfig) -> np.ndarray:
    scfg = make_sampler_config(cfg, mix=mix, seed=seed)
    ids = (cache.ids(inst) for inst in sample_run(scfg, n_samples))
    seqs = list(pack(ids, pcfg))
    if not seqs:
        raise ConfigError("ablation produced no packed sequences; increase n_samples")
    arr = np.asarray(seqs, dtype=np.int64)
    return arr


def run_ablate(cfg: PipelineConfig) -> dict:
    ab = cfg.ablate
    t_grow = int(ab.get("t_grow", 100_000))
    n_samples = int(ab.get("n_samples", 2 * t_grow))
    n_seeds = int(ab.get("seeds", 3))
    pre_steps = int(ab.get("pretrain_steps", 500))
    pre_lr = float(ab.get("pretrain_lr", 3e-3))
    eval_every = int(ab.get("eval_every", 0))
    if n_seeds < 1:
        raise ConfigError("ablate.seeds must be >= 1")

    out_dir = os.path.join(cfg.out_dir, "ablate")
    os.makedirs(out_dir, exist_ok=True)

    by_name = {d.name: cfg.dataset_path(d) for d in cfg.datasets}
    missing = [p for p in by_name.values() if not os.path.exists(p)]
    eval_path = os.path.join(cfg.out_dir, "data", "eval_b.jsonl")
    if missing or not os.path.exists(eval_path):
        run_gen(cfg)

    base_v = base_vocab()
    new_tokens = synth_mod.target_alphabet(cfg.synth)
    ext_v, _, _ = extend_vocab(base_v, new_tokens)
    sep = sep_id_of(base_v)  # extension appends, so the id is stable
    pcfg = PackerConfig(seq_len=cfg.seq_len, sep_id=sep,
                        flush_policy="drop_tail", pad_id=sep)

    corpus_a_path = next(cfg.dataset_path(d) for d in cfg.datasets
                         if d.task is TaskKind.CORPUS_EN)
    pretrain_packed = pack_corpus_file(corpus_a_path, base_v, pcfg)
    eval_packed = pack_corpus_file(eval_path, ext_v, pcfg,
                                   task=TaskKind.CORPUS_TARGET)

    cache = TokenCache(ext_v)
    dyn_mix = scaled_mix(cfg.mix, t_grow)
    fix_mix = fixed_mix(cfg.mix, t_grow)
    batch = int(cfg.train.get("batch_size", 32))
    lr = float(cfg.train.get("lr", 1e-3))

    runs: list[dict] = []
    curves: dict[tuple[str, int], list[float]] = {}
    for s in range(n_seeds):
        seed_s = cfg.seed + s
        mcfg_base = model_config(cfg, len(base_v), seed=seed_s)
        params0 = trainer_mod.init_params(mcfg_base)
        params_pre, _ = trainer_mod.train(
            mcfg_base, TrainConfig(steps=pre_steps, batch_size=batch, lr=pre_lr),
            pretrain_packed, sep, params=params0)
        params_ext, v_check = trainer_mod.extend_params(params_pre, base_v, new_tokens)
        assert len(v_check) == len(ext_v)
        mcfg_ext = model_config(cfg, len(ext_v), seed=seed_s)

        arm_packed = {
            "dynamic": _packed_for_arm(cfg, dyn_mix, seed_s, n_samples, cache, pcfg),
            "fixed": _packed_for_arm(cfg, fix_mix, seed_s, n_samples, cache, pcfg),
        }
        # identical budgets and step grids for the two arms
        steps = min(a.shape[0] for a in arm_packed.values()) // batch
        if steps < 10:
            raise ConfigError("ablation budget too small; increase ablate.n_samples")
        tcfg = TrainConfig(steps=steps, batch_size=batch, lr=lr, eval_every=eval_every)

        for arm in ARMS:
            metrics_path = os.path.join(out_dir, f"{arm}_seed{s}_metrics.jsonl")
            with open(metrics_path, "w", encoding="utf-8", newline="\n") as fp:
                params, metrics = trainer_mod.train(
                    mcfg_ext, tcfg, arm_packed[arm], sep, params=params_ext,
                    eval_packed=eval_packed, metrics_fp=fp)
            losses = [m["train_loss"] for m in metrics]
            curves[(arm, s)] = losses
            runs.append({
                "seed": s,
                "arm": arm,
                "steps": steps,
                "early_loss": _window_mean(losses, 0.10, tail=False),
                "final_loss": _window_mean(losses, 0.10, tail=True),
                "target_ppl": trainer_mod.eval_ppl(params, eval_packed, sep),
                "metrics": metrics_path,
            })

    report = _summarize(runs, n_seeds)
    _write_report(out_dir, runs, report)
    _write_figures(out_dir, curves, runs, n_seeds)
    report["out_dir"] = out_dir
    return report


def _summarize(runs: list[dict], n_seeds: int) -> dict:
    per = {(r["arm"], r["seed"]): r for r in runs}
    early_lower = sum(
        per[("dynamic", s)]["early_loss"] < per[("fixed", s)]["early_loss"]
        for s in range(n_seeds))
    ppl_not_worse = sum(
        per[("dynamic", s)]["target_ppl"] <= per[("fixed", s)]["target_ppl"]
        for s in range(n_seeds))
    majority = n_seeds // 2 + 1
    return {
        "seeds": n_seeds,
        "dynamic_early_loss_lower": early_lower,
        "dynamic_target_ppl_not_worse": ppl_not_worse,
        "early_loss_majority": early_lower >= majority,
        "target_ppl_majority": ppl_not_worse >= majority,
        "runs": runs,
    }


def _write_report(out_dir: str, runs: list[dict], report: dict) -> None:
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fp:
        json.dump(report, fp, sort_keys=True, indent=2)
        fp.write("\n")
    with open(os.path.join(out_dir, "report.csv"), "w", encoding="utf-8",
              newline="") as fp:
        writer = csv.DictWriter(fp, fieldnames=[
            "seed", "arm", "steps", "early_loss", "final_loss", "target_ppl"])
        writer.writeheader()
        for r in runs:
            writer.writerow({k: r[k] for k in writer.fieldnames})


def _moving_average(xs: list[float], w: int) -> np.ndarray:
    if len(xs) < w:
        return np.asarray(xs)
    return np.convolve(xs, np.ones(w) / w, mode="valid")


def _write_figures(out_dir: str, curves: dict, runs: list[dict], n_seeds: int) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, n_seeds, figsize=(5 * n_seeds, 4), squeeze=False)
    colors = {"dynamic": "tab:blue", "fixed": "tab:red"}
    for s in range(n_seeds):
        ax = axes[0][s]
        for arm in ARMS:
            smooth = _moving_average(curves[(arm, s)], 50)
            ax.plot(np.arange(len(smooth)), smooth, color=colors[arm], label=arm)
        ax.set_title(f"seed {s}")
        ax.set_xlabel("step")
        ax.set_ylabel("training loss")
        ax.legend()
    fig.tight_layout()
    fig.savefig(os.path.join(out_dir, "loss_curves.png"), dpi=120)
    plt.close(fig)

    per = {(r["arm"], r["seed"]): r for r in runs}
    fig, ax = plt.subplots(figsize=(6, 4))
    xs = np.arange(n_seeds)
    width = 0.35
    for i, arm in enumerate(ARMS):
        vals = [per[(arm, s)]["target_ppl"] for s in range(n_seeds)]
        ax.bar(xs + (i - 0.5) * width, vals, width, label=arm, color=colors[arm])
    ax.set_xticks(xs)
    ax.set_xticklabels([f"seed {s}" for s in range(n_seeds)])
    ax.set_ylabel("target-language eval perplexity")
    ax.legend()
    fig.tight_layout()
    fig.savefig(os.path.join(out_dir, "target_ppl.png"), dpi=120)
    plt.close(fig)
