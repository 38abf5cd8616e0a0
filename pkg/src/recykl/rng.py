"""Deterministic 64-bit PRNG for reproducible problem generation.

The generators in :mod:`recykl.problems` must produce bit-identical output
for a given seed on every platform and in every run, so they cannot rely on
library RNGs whose streams may change between releases.  This module pins an
xorshift64* generator (Marsaglia triple 12/25/27 with Vigna's odd multiplier
0x2545F4914F6CDD1D) down to the bit:

    x ^= x >> 12;  x ^= x << 25;  x ^= x >> 27;  return x * 0x2545F4914F6CDD1D

Doubles are drawn as ``(word >> 11) * 2**-53``, uniform on [0, 1).
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_MULT = 0x2545F4914F6CDD1D
# splitmix64 constants, used once to scramble the user seed so that small
# consecutive seeds yield decorrelated streams and seed 0 is legal.
_SM_GAMMA = 0x9E3779B97F4A7C15
_SM_M1 = 0xBF58476D1CE4E5B9
_SM_M2 = 0x94D049BB133111EB


def _scramble_seed(seed: int) -> int:
    z = (seed + _SM_GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * _SM_M1) & _MASK64
    z = ((z ^ (z >> 27)) * _SM_M2) & _MASK64
    z ^= z >> 31
    return z if z != 0 else _SM_GAMMA


class Xorshift64Star:
    """xorshift64* stream seeded through one splitmix64 scramble."""

    def __init__(self, seed: int):
        self._state = _scramble_seed(int(seed) & _MASK64)

    def next_word(self) -> int:
        x = self._state
        x ^= x >> 12
        x ^= (x << 25) & _MASK64
        x ^= x >> 27
        self._state = x
        return (x * _MULT) & _MASK64

    def uniform(self) -> float:
        """One double, uniform on [0, 1)."""
        return (self.next_word() >> 11) * 2.0**-53

    def uniforms(self, count: int) -> list[float]:
        return [self.uniform() for _ in range(count)]
