"""Deterministic 64-bit pseudorandom generator for reproducible sampling.

The pipeline pins SplitMix64-seeded xoshiro256** so that any run can be
replayed bit-for-bit from (algorithm id, seed). The algorithm id below is
written into every provenance log header.
"""

from __future__ import annotations

ALGORITHM_ID = "xoshiro256** (splitmix64-seeded)"

_MASK64 = (1 << 64) - 1


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


def splitmix64_next(state: int) -> tuple[int, int]:
    """Advance a SplitMix64 state once; returns (new_state, output)."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


class Xoshiro256StarStar:
    """xoshiro256** generator; state seeded with four SplitMix64 outputs."""

    __slots__ = ("_s",)

    def __init__(self, seed: int):
        seed &= _MASK64
        state = seed
        s = []
        for _ in range(4):
            state, out = splitmix64_next(state)
            s.append(out)
        self._s = s

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def random(self) -> float:
        """Uniform double in [0, 1) using the top 53 bits."""
        return (self.next_u64() >> 11) * 2.0 ** -53

    def getstate(self) -> tuple[int, int, int, int]:
        return tuple(self._s)

    def setstate(self, state) -> None:
        self._s = [x & _MASK64 for x in state]
