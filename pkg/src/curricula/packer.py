"""Fixed-length packing of tokenized instances (full-sentence strategy).

Instances are concatenated end to end, each followed by a separator token,
and the resulting stream is chunked into consecutive windows of exactly L
ids; instances freely cross window boundaries. The final partial window is
dropped (default) or padded, per flush policy.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .errors import ConfigError, CurriculaError

FLUSH_POLICIES = ("drop_tail", "pad_tail")

PACKED_MAGIC = b"PAK1"


@dataclass(frozen=True)
class PackerConfig:
    seq_len: int = 2048
    sep_id: int = 0
    flush_policy: str = "drop_tail"
    pad_id: int = 0

    def __post_init__(self):
        if self.seq_len < 2:
            raise ConfigError(f"seq_len must be >= 2, got {self.seq_len}")
        if self.flush_policy not in FLUSH_POLICIES:
            raise ConfigError(f"unknown flush policy {self.flush_policy!r}")


@dataclass
class PackStats:
    instances: int = 0
    sequences: int = 0
    separators: int = 0
    input_tokens: int = 0
    dropped: int = 0
    padded: int = 0

    def report(self, cfg: PackerConfig) -> dict:
        emitted = self.sequences * cfg.seq_len
        return {
            "instances": self.instances,
            "sequences": self.sequences,
            "separators": self.separators,
            "input_tokens": self.input_tokens,
            "emitted_tokens": emitted,
            "dropped": self.dropped,
            "padded": self.padded,
            # stream conservation: every input or separator token is either
            # emitted, dropped at flush, or displaced by padding
            "conserved": self.input_tokens + self.separators + self.padded
                          == emitted + self.dropped,
        }


def pack(instances: Iterable[list[int]], cfg: PackerConfig,
         stats: PackStats | None = None) -> Iterator[list[int]]:
    """Yield windows of exactly cfg.seq_len ids; updates stats if given."""
    if stats is None:
        stats = PackStats()
    buffer: list[int] = []
    L = cfg.seq_len
    for ids in instances:
        stats.instances += 1
        stats.input_tokens += len(ids)
        stats.separators += 1
        buffer.extend(ids)
        buffer.append(cfg.sep_id)
        while len(buffer) >= L:
            stats.sequences += 1
            yield buffer[:L]
            del buffer[:L]
    if buffer:
        if cfg.flush_policy == "pad_tail":
            stats.padded = L - len(buffer)
            stats.sequences += 1
            yield buffer + [cfg.pad_id] * (L - len(buffer))
        else:
            stats.dropped = len(buffer)


def pack_all(instances: Iterable[list[int]], cfg: PackerConfig) -> tuple[list[list[int]], PackStats]:
    stats = PackStats()
    return list(pack(instances, cfg, stats)), stats


@dataclass
class PackedWriter:
    """Streaming writer for the binary packed format.

    Layout: magic PAK1, u32 seq_len, u64 sequence count (little-endian),
    then sequences as consecutive little-endian u32 ids.
    """

    path: str
    seq_len: int
    count: int = field(default=0, init=False)

    def __enter__(self):
        self._fp = open(self.path, "wb")
        self._fp.write(PACKED_MAGIC)
        self._fp.write(struct.pack("<IQ", self.seq_len, 0))
        return self

    def write(self, ids: list[int]) -> None:
        if len(ids) != self.seq_len:
            raise CurriculaError(f"sequence length {len(ids)} != {self.seq_len}")
        self._fp.write(np.asarray(ids, dtype="<u4").tobytes())
        self.count += 1

    def __exit__(self, *exc):
        self._fp.seek(4 + 4)
        self._fp.write(struct.pack("<Q", self.count))
        self._fp.close()
        return False


def write_packed(path, sequences: Iterable[list[int]], seq_len: int) -> int:
    with PackedWriter(str(path), seq_len) as w:
        for seq in sequences:
            w.write(seq)
        return w.count


def read_packed(path) -> np.ndarray:
    """Load a packed file as an (n_sequences, seq_len) uint32 array."""
    with open(path, "rb") as fp:
        magic = fp.read(4)
        if magic != PACKED_MAGIC:
            raise CurriculaError(f"{path}: bad magic {magic!r}")
        seq_len, count = struct.unpack("<IQ", fp.read(12))
        data = np.frombuffer(fp.read(seq_len * count * 4), dtype="<u4")
    if data.size != seq_len * count:
        raise CurriculaError(f"{path}: truncated packed file")
    return data.reshape(int(count), int(seq_len)).astype(np.uint32)
