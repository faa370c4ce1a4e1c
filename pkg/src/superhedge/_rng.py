"""Deterministic counter-based random number generator.

All randomized corpora in this repository (oracle alpha draws, model
simulation, test model generators) use SplitMix64 so that the same seed
reproduces the same stream on every platform and in every language:

    state_{i+1} = state_i + 0x9E3779B97F4A7C15   (mod 2^64)
    z = state_{i+1}
    z = (z XOR (z >> 30)) * 0xBF58476D1CE4E5B9   (mod 2^64)
    z = (z XOR (z >> 27)) * 0x94D049BB133111EB   (mod 2^64)
    out_i = z XOR (z >> 31)

Uniform doubles take the top 53 bits: out_i >> 11, divided by 2^53.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


class SplitMix64:
    """SplitMix64 stream seeded by a 64-bit integer."""

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) / 9007199254740992.0  # 2^53

    def uniform_in(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.uniform()

    def randint(self, n: int) -> int:
        """Integer in [0, n)."""
        return min(int(self.uniform() * n), n - 1)
