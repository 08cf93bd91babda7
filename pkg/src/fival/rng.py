"""Portable seeded randomness.

Every randomized operation in this package draws from SplitMix64, a
published 64-bit generator (Steele, Lea & Flood 2014; the same mixer that
backs java.util.SplittableRandom). It is implemented here in ~20 lines of
integer arithmetic so that a given seed produces the same draws on every
platform and Python version, which the stdlib does not guarantee for
``random.shuffle``.

Seeds for per-record work are derived with :func:`derive_seed`, a keyed
BLAKE2b digest, so results never depend on processing order.
"""

from __future__ import annotations

from hashlib import blake2b
from typing import Sequence, TypeVar

MASK64 = (1 << 64) - 1

_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# rejection-sampling thresholds for small n, so the shuffle hot loop
# avoids a big-integer division per draw
_LIMITS = tuple(((1 << 64) // n) * n for n in range(1, 129))

T = TypeVar("T")


class SplitMix64:
    """Deterministic 64-bit PRNG with a published algorithm."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & MASK64
        return z ^ (z >> 31)

    def randbelow(self, n: int) -> int:
        """Unbiased integer in [0, n) via rejection sampling."""
        if n <= 0:
            raise ValueError("randbelow requires n >= 1")
        limit = _LIMITS[n - 1] if n <= 128 else ((1 << 64) // n) * n
        while True:
            r = self.next_u64()
            if r < limit:
                return r % n

    def shuffle(self, items: list, _mask=MASK64, _gamma=_GAMMA, _m1=_MIX1,
                _m2=_MIX2, _limits=_LIMITS) -> None:
        """In-place Fisher-Yates shuffle.

        Draw-for-draw identical to calling ``randbelow(i + 1)`` per slot;
        the mixer is inlined and constants are bound locally because this
        sits on the permuter's hot path.
        """
        state = self._state
        for i in range(len(items) - 1, 0, -1):
            n = i + 1
            limit = _limits[i] if n <= 128 else ((1 << 64) // n) * n
            while True:
                state = (state + _gamma) & _mask
                z = ((state ^ (state >> 30)) * _m1) & _mask
                z = ((z ^ (z >> 27)) * _m2) & _mask
                r = z ^ (z >> 31)
                if r < limit:
                    break
            j = r % n
            items[i], items[j] = items[j], items[i]
        self._state = state

    def choice(self, seq: Sequence[T]) -> T:
        if not seq:
            raise ValueError("choice from empty sequence")
        return seq[self.randbelow(len(seq))]


def derive_seed(master_seed: int, *parts: object) -> int:
    """Derive a child seed from a master seed and a label path.

    Uses BLAKE2b (8-byte digest) over a length-prefixed encoding, so the
    mapping is stable across platforms and immune to separator collisions
    (("ab", "c") and ("a", "bc") derive different seeds).
    """
    h = blake2b(digest_size=8)
    h.update((master_seed & MASK64).to_bytes(8, "little"))
    for part in parts:
        data = str(part).encode("utf-8")
        h.update(len(data).to_bytes(4, "little"))
        h.update(data)
    return int.from_bytes(h.digest(), "little")
