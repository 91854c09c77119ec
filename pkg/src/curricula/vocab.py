"""Byte-fallback vocabulary, greedy tokenizer, and vocabulary extension.

The tokenizer is greedy longest-match over token byte strings, left to
right. The 256 single-byte tokens are always present, so tokenization is a
total function and concatenating the token bytes of any string reproduces
it exactly. This is a fully specified stand-in for a subword tokenizer;
the extension procedure only needs the base tokenization of each new token.

Extension appends new tokens to the id space (existing ids never move) and
initializes each new embedding/output row as the arithmetic mean of the
base rows of the token's base tokenization, accumulated in 64-bit and
stored in 32-bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, CurriculaError

END_OF_TEXT = "<|endoftext|>"

MATRIX_MAGIC = b"EMB1"


@dataclass(frozen=True)
class Vocab:
    tokens: tuple[bytes, ...]

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        index: dict[bytes, int] = {}
        max_len = 1
        for i, tok in enumerate(self.tokens):
            if not tok:
                raise ConfigError(f"empty token at id {i}")
            if tok in index:
                raise ConfigError(f"duplicate token {tok!r}")
            index[tok] = i
            max_len = max(max_len, len(tok))
        for b in range(256):
            if bytes([b]) not in index:
                raise ConfigError(f"single-byte token {b:#04x} missing from vocab")
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_max_len", max_len)

    def __len__(self) -> int:
        return len(self.tokens)

    def id_of(self, token: str | bytes) -> int:
        key = token.encode("utf-8") if isinstance(token, str) else token
        return self._index[key]

    def __contains__(self, token) -> bool:
        key = token.encode("utf-8") if isinstance(token, str) else token
        return key in self._index


def base_vocab(extra_tokens: tuple[str, ...] = (END_OF_TEXT,)) -> Vocab:
    """The 256 single-byte tokens followed by any extra multi-byte tokens."""
    tokens = [bytes([b]) for b in range(256)]
    tokens.extend(t.encode("utf-8") for t in extra_tokens)
    return Vocab(tuple(tokens))


def tokenize(v: Vocab, text: str | bytes) -> list[int]:
    """Greedy longest-match token ids; total via the single-byte fallback."""
    data = text.encode("utf-8") if isinstance(text, str) else text
    index = v._index
    max_len = v._max_len
    ids: list[int] = []
    pos = 0
    n = len(data)
    while pos < n:
        for length in range(min(max_len, n - pos), 0, -1):
            tid = index.get(data[pos:pos + length])
            if tid is not None:
                ids.append(tid)
                pos += length
                break
    return ids


def detokenize(v: Vocab, ids: list[int]) -> bytes:
    return b"".join(v.tokens[i] for i in ids)


def _normalize_new_tokens(new_tokens) -> list[bytes]:
    out = []
    seen = set()
    for tok in new_tokens:
        key = tok.encode("utf-8") if isinstance(tok, str) else bytes(tok)
        if not key:
            raise ConfigError("new token must be non-empty")
        if key in seen:
            raise ConfigError(f"duplicate new token {key!r}")
        seen.add(key)
        out.append(key)
    return out


def extend_vocab(v: Vocab, new_tokens) -> tuple[Vocab, list[bytes], list[bytes]]:
    """Append the tokens not already present, preserving input order.

    Returns (extended vocab, appended tokens, skipped tokens). Tokens already
    in the vocabulary are skipped, not errors, so re-running an extension is
    idempotent; duplicates *within* new_tokens are rejected as ambiguous.
    """
    appended: list[bytes] = []
    skipped: list[bytes] = []
    for key in _normalize_new_tokens(new_tokens):
        if key in v:
            skipped.append(key)
        else:
            appended.append(key)
    return Vocab(v.tokens + tuple(appended)), appended, skipped


def mean_init_rows(e: np.ndarray, v_base: Vocab, new_tokens) -> np.ndarray:
    """Extend a |V|xd matrix with one mean-initialized row per appended token.

    Each new row is the arithmetic mean of the base rows selected by the
    base tokenization of the token (multiset: repeats count). Accumulation
    is 64-bit, storage 32-bit; pre-existing rows are returned bit-identical.
    """
    e = np.asarray(e)
    if e.ndim != 2 or e.shape[0] != len(v_base):
        raise CurriculaError(
            f"matrix has {e.shape[0] if e.ndim == 2 else '?'} rows, vocab has {len(v_base)}")
    _, appended, _ = extend_vocab(v_base, new_tokens)
    new_rows = np.empty((len(appended), e.shape[1]), dtype=np.float32)
    e64 = e.astype(np.float64)
    for i, tok in enumerate(appended):
        ids = tokenize(v_base, tok)
        new_rows[i] = e64[ids].mean(axis=0).astype(np.float32)
    return np.concatenate([e.astype(np.float32), new_rows], axis=0)


def extend_model_vocab(embedding: np.ndarray, output: np.ndarray, v: Vocab,
                       new_tokens) -> tuple[np.ndarray, np.ndarray, Vocab]:
    """Extend both vocab-indexed matrices by the same procedure and order."""
    for name, m in (("embedding", embedding), ("output", output)):
        if np.asarray(m).shape[0] != len(v):
            raise CurriculaError(f"{name} matrix rows do not match vocab size {len(v)}")
    v2, _, _ = extend_vocab(v, new_tokens)
    e2 = mean_init_rows(embedding, v, new_tokens)
    o2 = mean_init_rows(output, v, new_tokens)
    return e2, o2, v2


# ---------------------------------------------------------------------------
# File formats

def _escape_token(token: bytes) -> str:
    out: list[str] = []
    i = 0
    n = len(token)
    while i < n:
        b = token[i]
        if b == 0x5C:
            out.append("\\\\")
            i += 1
        elif b == 0x0A:
            out.append("\\n")
            i += 1
        elif b == 0x09:
            out.append("\\t")
            i += 1
        elif b < 0x20 or b == 0x7F:
            out.append(f"\\x{b:02x}")
            i += 1
        else:
            decoded = None
            for length in (1, 2, 3, 4):
                chunk = token[i:i + length]
                try:
                    ch = chunk.decode("utf-8")
                except UnicodeDecodeError:
                    continue
                decoded = (ch, length)
                break
            if decoded is None:
                out.append(f"\\x{b:02x}")
                i += 1
            else:
                out.append(decoded[0])
                i += decoded[1]
    return "".join(out)


def _unescape_token(line: str) -> bytes:
    out = bytearray()
    i = 0
    n = len(line)
    while i < n:
        ch = line[i]
        if ch == "\\":
            if i + 1 >= n:
                raise CurriculaError("dangling escape in vocab file")
            nxt = line[i + 1]
            if nxt == "n":
                out.append(0x0A)
                i += 2
            elif nxt == "t":
                out.append(0x09)
                i += 2
            elif nxt == "\\":
                out.append(0x5C)
                i += 2
            elif nxt == "x":
                out.append(int(line[i + 2:i + 4], 16))
                i += 4
            else:
                raise CurriculaError(f"unknown escape \\{nxt} in vocab file")
        else:
            out.extend(ch.encode("utf-8"))
            i += 1
    return bytes(out)


def write_vocab(path, v: Vocab) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fp:
        for tok in v.tokens:
            fp.write(_escape_token(tok) + "\n")


def read_vocab(path) -> Vocab:
    with open(path, encoding="utf-8", newline="\n") as fp:
        tokens = [_unescape_token(line[:-1] if line.endswith("\n") else line)
                  for line in fp]
    return Vocab(tuple(tokens))


def write_matrix(path, arr: np.ndarray) -> None:
    """Binary matrix: magic EMB1, u32 rows, u32 cols, float32 values (all LE)."""
    arr = np.asarray(arr, dtype=np.float32)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise CurriculaError("matrix file requires a 1-D or 2-D array")
    with open(path, "wb") as fp:
        fp.write(MATRIX_MAGIC)
        fp.write(np.array(arr.shape, dtype="<u4").tobytes())
        fp.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def read_matrix(path) -> np.ndarray:
    with open(path, "rb") as fp:
        magic = fp.read(4)
        if magic != MATRIX_MAGIC:
            raise CurriculaError(f"{path}: bad magic {magic!r}")
        rows, cols = np.frombuffer(fp.read(8), dtype="<u4")
        data = np.frombuffer(fp.read(int(rows) * int(cols) * 4), dtype="<f4")
        if data.size != rows * cols:
            raise CurriculaError(f"{path}: truncated matrix file")
    return data.reshape(int(rows), int(cols)).astype(np.float32)
