"""Desk-scale neural language model with hand-derived gradients.

The model predicts the next token from a window of the previous k tokens
(left-padded with the separator id at sequence start): log-softmax of
``W2 . tanh(W1 . concat(E[window]) + b1) + b2``. It is trained with plain
Adam on the standard next-token negative log-likelihood, uniformly over all
data formats (no loss masking). All forward/backward arithmetic is 64-bit;
the 32-bit interchange matrix format is used only for checkpoints.

The k-token window is a deliberate approximation of full-prefix
conditioning: it keeps every gradient checkable against finite differences
while still exposing curriculum effects at desk scale.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from . import vocab as vocab_mod
from .errors import ConfigError, CurriculaError
from .vocab import Vocab


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    context: int = 8
    embed_dim: int = 32
    hidden_dim: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.context < 1 or self.embed_dim < 1 or self.hidden_dim < 1:
            raise ConfigError("model dims must be positive")
        if self.vocab_size < 2:
            raise ConfigError("vocab_size must be >= 2")


@dataclass
class ModelParams:
    E: np.ndarray    # (V, d) embedding
    W1: np.ndarray   # (k*d, h)
    b1: np.ndarray   # (h,)
    W2: np.ndarray   # (h, V) output matrix
    b2: np.ndarray   # (V,)

    @property
    def vocab_size(self) -> int:
        return self.E.shape[0]

    def copy(self) -> "ModelParams":
        return ModelParams(*(getattr(self, f).copy() for f in ("E", "W1", "b1", "W2", "b2")))

    def fields(self):
        return ("E", "W1", "b1", "W2", "b2")


@dataclass(frozen=True)
class TrainConfig:
    steps: int
    batch_size: int = 32
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.95
    eps: float = 1e-8
    eval_every: int = 0  # 0 disables in-run perplexity evaluation

    def __post_init__(self):
        if self.steps < 0 or self.batch_size < 1:
            raise ConfigError("steps must be >= 0 and batch_size >= 1")
        if self.lr <= 0:
            raise ConfigError("learning rate must be positive")


def init_params(cfg: ModelConfig) -> ModelParams:
    """Gaussian(0, 0.02) matrices and zero biases, from the run seed."""
    rng = np.random.default_rng(cfg.seed)
    kd = cfg.context * cfg.embed_dim
    return ModelParams(
        E=rng.normal(0.0, 0.02, (cfg.vocab_size, cfg.embed_dim)),
        W1=rng.normal(0.0, 0.02, (kd, cfg.hidden_dim)),
        b1=np.zeros(cfg.hidden_dim),
        W2=rng.normal(0.0, 0.02, (cfg.hidden_dim, cfg.vocab_size)),
        b2=np.zeros(cfg.vocab_size),
    )


def _check_ids(ids: np.ndarray, vocab_size: int) -> None:
    if ids.size and (ids.min() < 0 or ids.max() >= vocab_size):
        raise CurriculaError(f"token id outside [0, {vocab_size})")


def _forward(p: ModelParams, contexts: np.ndarray):
    n, k = contexts.shape
    x = p.E[contexts].reshape(n, k * p.E.shape[1])
    a = np.tanh(x @ p.W1 + p.b1)
    logits = a @ p.W2 + p.b2
    # stable logsumexp; reduces to log(V) exactly for all-zero logits
    m = logits.max(axis=1)
    logz = m + np.log(np.exp(logits - m[:, None]).sum(axis=1))
    return x, a, logits, logz


def log_probs(p: ModelParams, context: list[int] | np.ndarray) -> np.ndarray:
    """Log-probability vector over the vocabulary given k previous token ids."""
    ctx = np.asarray(context, dtype=np.int64).reshape(1, -1)
    _check_ids(ctx, p.vocab_size)
    _, _, logits, logz = _forward(p, ctx)
    return (logits[0] - logz[0])


def _context_windows(seqs: np.ndarray, k: int, pad_id: int) -> tuple[np.ndarray, np.ndarray]:
    """(contexts, targets) for predicting positions 1..L-1 of each sequence."""
    b, L = seqs.shape
    padded = np.concatenate([np.full((b, k), pad_id, dtype=np.int64),
                             seqs[:, :-1].astype(np.int64)], axis=1)
    windows = np.lib.stride_tricks.sliding_window_view(padded, k, axis=1)[:, 1:, :]
    contexts = windows.reshape(b * (L - 1), k)
    targets = seqs[:, 1:].astype(np.int64).reshape(-1)
    return contexts, targets


def nll_loss(p: ModelParams, seq, pad_id: int) -> float:
    """Mean next-token negative log-likelihood over positions 1..L-1."""
    seqs = np.asarray(seq, dtype=np.int64).reshape(1, -1)
    if seqs.shape[1] < 2:
        raise ConfigError("sequence must have length >= 2")
    _check_ids(seqs, p.vocab_size)
    contexts, targets = _context_windows(seqs, p.W1.shape[0] // p.E.shape[1], pad_id)
    _, _, logits, logz = _forward(p, contexts)
    return float(np.mean(logz - logits[np.arange(len(targets)), targets]))


def grad(p: ModelParams, batch, pad_id: int) -> tuple[float, ModelParams]:
    """Loss and exact analytic gradient of the batch-mean nll."""
    seqs = np.asarray(batch, dtype=np.int64)
    if seqs.ndim == 1:
        seqs = seqs.reshape(1, -1)
    if seqs.size == 0:
        raise ConfigError("batch must be non-empty")
    _check_ids(seqs, p.vocab_size)
    k = p.W1.shape[0] // p.E.shape[1]
    d = p.E.shape[1]
    contexts, targets = _context_windows(seqs, k, pad_id)
    n = len(targets)
    x, a, logits, logz = _forward(p, contexts)
    loss = float(np.mean(logz - logits[np.arange(n), targets]))

    dlogits = np.exp(logits - logz[:, None])
    dlogits[np.arange(n), targets] -= 1.0
    dlogits /= n
    g_w2 = a.T @ dlogits
    g_b2 = dlogits.sum(axis=0)
    da = dlogits @ p.W2.T
    dpre = da * (1.0 - a * a)
    g_w1 = x.T @ dpre
    g_b1 = dpre.sum(axis=0)
    dx = (dpre @ p.W1.T).reshape(n, k, d)
    g_e = np.zeros_like(p.E)
    np.add.at(g_e, contexts, dx)
    return loss, ModelParams(E=g_e, W1=g_w1, b1=g_b1, W2=g_w2, b2=g_b2)


def eval_ppl(p: ModelParams, packed: np.ndarray, pad_id: int) -> float:
    """exp of the mean nll over all positions of all sequences (64-bit)."""
    packed = np.asarray(packed, dtype=np.int64)
    if packed.size == 0:
        raise ConfigError("eval set is empty")
    _check_ids(packed, p.vocab_size)
    k = p.W1.shape[0] // p.E.shape[1]
    contexts, targets = _context_windows(packed, k, pad_id)
    total = 0.0
    count = 0
    # fixed-size chunks keep memory bounded; summation order is fixed
    for start in range(0, len(targets), 8192):
        ctx = contexts[start:start + 8192]
        tgt = targets[start:start + 8192]
        _, _, logits, logz = _forward(p, ctx)
        total += float(np.sum(logz - logits[np.arange(len(tgt)), tgt]))
        count += len(tgt)
    return float(np.exp(total / count))


@dataclass
class AdamState:
    m: ModelParams
    v: ModelParams
    t: int = 0


def _zeros_like(p: ModelParams) -> ModelParams:
    return ModelParams(*(np.zeros_like(getattr(p, f)) for f in p.fields()))


def adam_step(p: ModelParams, g: ModelParams, state: AdamState, cfg: TrainConfig) -> None:
    state.t += 1
    c1 = 1.0 - cfg.beta1 ** state.t
    c2 = 1.0 - cfg.beta2 ** state.t
    for f in p.fields():
        gf = getattr(g, f)
        m = getattr(state.m, f)
        v = getattr(state.v, f)
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * gf
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * gf * gf
        getattr(p, f)[...] -= cfg.lr * (m / c1) / (np.sqrt(v / c2) + cfg.eps)


def train(model_cfg: ModelConfig, train_cfg: TrainConfig, packed: np.ndarray,
          pad_id: int, params: ModelParams | None = None,
          eval_packed: np.ndarray | None = None,
          metrics_fp=None) -> tuple[ModelParams, list[dict]]:
    """Run Adam for train_cfg.steps over the packed sequences, cycling in order.

    Returns the trained parameters and the per-step metrics records; each
    record is also written to metrics_fp as a JSON line when given.
    """
    packed = np.asarray(packed, dtype=np.int64)
    if packed.ndim != 2:
        raise ConfigError("packed data must be a 2-D array of token ids")
    if packed.shape[0] == 0 and train_cfg.steps > 0:
        raise ConfigError("packed data is empty")
    p = params.copy() if params is not None else init_params(model_cfg)
    if p.vocab_size != model_cfg.vocab_size:
        raise ConfigError("params vocab size does not match model config")
    state = AdamState(m=_zeros_like(p), v=_zeros_like(p))
    metrics: list[dict] = []
    tokens_seen = 0
    n = packed.shape[0]
    for step in range(1, train_cfg.steps + 1):
        idx = (np.arange(train_cfg.batch_size) + (step - 1) * train_cfg.batch_size) % n
        batch = packed[idx]
        loss, g = grad(p, batch, pad_id)
        if not np.isfinite(loss):
            raise CurriculaError(f"non-finite loss at step {step}")
        adam_step(p, g, state, train_cfg)
        tokens_seen += batch.size
        record = {"step": step, "tokens_seen": tokens_seen, "train_loss": loss}
        if train_cfg.eval_every and eval_packed is not None \
                and step % train_cfg.eval_every == 0:
            record["eval_ppl"] = eval_ppl(p, eval_packed, pad_id)
        metrics.append(record)
        if metrics_fp is not None:
            metrics_fp.write(json.dumps(record, sort_keys=True) + "\n")
    return p, metrics


def extend_params(p: ModelParams, v: Vocab, new_tokens) -> tuple[ModelParams, Vocab]:
    """Extend E and the output matrix via the vocab procedure; b2 gains zeros.

    The extension round-trips through the 32-bit interchange precision, the
    same values a checkpoint would carry.
    """
    e32 = p.E.astype(np.float32)
    o32 = p.W2.T.astype(np.float32).copy()  # vocab-major orientation
    e2, o2, v2 = vocab_mod.extend_model_vocab(e32, o32, v, new_tokens)
    n_new = len(v2) - len(v)
    return ModelParams(
        E=e2.astype(np.float64),
        W1=p.W1.copy(),
        b1=p.b1.copy(),
        W2=o2.astype(np.float64).T.copy(),
        b2=np.concatenate([p.b2, np.zeros(n_new)]),
    ), v2


# ---------------------------------------------------------------------------
# Checkpoints: vocab file + EMB1 tensors + a JSON sidecar with the dims.

def save_checkpoint(dirpath, model_cfg: ModelConfig, p: ModelParams, v: Vocab) -> None:
    os.makedirs(dirpath, exist_ok=True)
    vocab_mod.write_vocab(os.path.join(dirpath, "vocab.txt"), v)
    vocab_mod.write_matrix(os.path.join(dirpath, "E.emb"), p.E)
    vocab_mod.write_matrix(os.path.join(dirpath, "W2.emb"), p.W2.T)  # (V, h)
    vocab_mod.write_matrix(os.path.join(dirpath, "W1.emb"), p.W1)
    vocab_mod.write_matrix(os.path.join(dirpath, "b1.emb"), p.b1)
    vocab_mod.write_matrix(os.path.join(dirpath, "b2.emb"), p.b2)
    meta = {
        "vocab_size": model_cfg.vocab_size,
        "context": model_cfg.context,
        "embed_dim": model_cfg.embed_dim,
        "hidden_dim": model_cfg.hidden_dim,
        "seed": model_cfg.seed,
    }
    with open(os.path.join(dirpath, "meta.json"), "w", encoding="utf-8") as fp:
        json.dump(meta, fp, sort_keys=True, indent=2)
        fp.write("\n")


def load_checkpoint(dirpath) -> tuple[ModelConfig, ModelParams, Vocab]:
    with open(os.path.join(dirpath, "meta.json"), encoding="utf-8") as fp:
        meta = json.load(fp)
    cfg = ModelConfig(**meta)
    v = vocab_mod.read_vocab(os.path.join(dirpath, "vocab.txt"))
    if len(v) != cfg.vocab_size:
        raise CurriculaError("checkpoint vocab size mismatch")
    p = ModelParams(
        E=vocab_mod.read_matrix(os.path.join(dirpath, "E.emb")).astype(np.float64),
        W1=vocab_mod.read_matrix(os.path.join(dirpath, "W1.emb")).astype(np.float64),
        b1=vocab_mod.read_matrix(os.path.join(dirpath, "b1.emb")).astype(np.float64)[0],
        W2=vocab_mod.read_matrix(os.path.join(dirpath, "W2.emb")).astype(np.float64).T.copy(),
        b2=vocab_mod.read_matrix(os.path.join(dirpath, "b2.emb")).astype(np.float64)[0],
    )
    return cfg, p, v
