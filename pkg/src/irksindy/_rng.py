"""Seedable random number generation with a fixed, documented algorithm.

Reproducibility across platforms and library versions matters more here
than raw speed: noisy datasets and network initializations written to disk
must be bit-identical for a given seed.  We therefore use SplitMix64
(Steele, Lea & Flood 2014) as the uniform source -- a 64-bit counter-based
generator with a three-stage mixing function -- and the Box-Muller
transform for Gaussian variates.  No global state is kept.
"""

import math

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF


class SplitMix64:
    """SplitMix64 stream; `uniform` yields doubles in [0, 1)."""

    def __init__(self, seed: int):
        self._state = int(seed) & _MASK64
        self._spare = None

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        # top 53 bits -> double in [0, 1)
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def uniform_array(self, shape, low=0.0, high=1.0) -> np.ndarray:
        n = int(np.prod(shape)) if shape else 1
        vals = [low + (high - low) * self.uniform() for _ in range(n)]
        return np.array(vals, dtype=float).reshape(shape)

    def normal(self) -> float:
        """Standard normal variate via the Box-Muller transform."""
        if self._spare is not None:
            z = self._spare
            self._spare = None
            return z
        # 1 - u lies in (0, 1], keeping the log argument positive
        u1 = 1.0 - self.uniform()
        u2 = self.uniform()
        r = math.sqrt(-2.0 * math.log(u1))
        self._spare = r * math.sin(2.0 * math.pi * u2)
        return r * math.cos(2.0 * math.pi * u2)

    def normal_array(self, shape) -> np.ndarray:
        n = int(np.prod(shape)) if shape else 1
        vals = [self.normal() for _ in range(n)]
        return np.array(vals, dtype=float).reshape(shape)
