"""Portable seeded randomness.

Every random decision in the toolkit flows through SplitMix64, a 64-bit
generator with a fully specified integer update, so identical seeds give
byte-identical results on every platform and Python version.

Stream splitting: substreams are derived by folding FNV-1a hashes of string
keys into the root seed, one scramble round per key.  ``substream(seed, "corrupt", qid)``
therefore yields an independent, order-free stream per query id.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    """FNV-1a hash of a byte string, 64-bit."""
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return h


def _scramble(z: int) -> int:
    # SplitMix64 output function (Steele, Lea & Flood 2014).
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class SeededRng:
    """SplitMix64 stream. One instance per logical task; never shared across threads."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        return _scramble(self._state)

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (2.0**-53)

    def below(self, n: int) -> int:
        """Uniform integer in [0, n) via 128-bit multiply-shift (bias < n / 2**64)."""
        if n <= 0:
            raise ValueError("below() requires n >= 1")
        return (self.next_u64() * n) >> 64

    def choice(self, seq):
        return seq[self.below(len(seq))]

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]


def substream(seed: int, *keys) -> SeededRng:
    """Independent stream for (seed, keys...).

    Keys are stringified, FNV-1a hashed, XORed into the running state and
    scrambled, so substreams do not depend on the order records are processed.
    """
    state = seed & _MASK64
    for key in keys:
        state = _scramble(state ^ fnv1a64(str(key).encode("utf-8")))
    return SeededRng(state)
