"""Deterministic pseudo-randomness for init and shuffling.

All randomness in the package flows from one seed through SplitMix64
(the mixer from Steele, Lea & Flood's SplittableRandom). It is tiny,
has a documented closed form, and - unlike library generators - its
stream can never drift between library versions, which is what lets a
checkpoint header promise "rng: splitmix64" and mean it. Identical
seeds give bit-identical draws on any platform.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


class SplitMix64:
    """Counter-based 64-bit generator; one state word, period 2^64."""

    name = "splitmix64"

    def __init__(self, seed: int):
        self._state = int(seed) & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK
        return _mix(self._state)

    def random(self) -> float:
        """One float64 uniform on [0, 1), using the top 53 bits."""
        return (self.next_u64() >> 11) * 2.0 ** -53

    def uniform(self, low: float, high: float, size) -> np.ndarray:
        """Array of uniforms on [low, high); same stream as scalar draws.

        The state advances by one _GOLDEN step per element, exactly as
        next_u64 would, so scalar and vectorized paths interleave freely.
        """
        n = int(np.prod(size)) if not np.isscalar(size) else int(size)
        steps = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self._state) + steps * np.uint64(_GOLDEN)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
            z = z ^ (z >> np.uint64(31))
        self._state = (self._state + n * _GOLDEN) & _MASK
        u = (z >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
        out = low + (high - low) * u
        return out.reshape(size) if not np.isscalar(size) else out

    def below(self, n: int) -> int:
        """Unbiased integer in [0, n) by rejection sampling."""
        if n <= 0:
            raise ValueError("bound must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            u = self.next_u64()
            if u < limit:
                return u % n

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates shuffle of arange(n)."""
        order = np.arange(n)
        for i in range(n - 1, 0, -1):
            j = self.below(i + 1)
            order[i], order[j] = order[j], order[i]
        return order
