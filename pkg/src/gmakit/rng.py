"""Deterministic, language-portable random number generation.

All weight initialisation and epoch shuffling derive from a SplitMix64
sequence so that a run is reproducible from a single integer seed, and the
byte stream can be re-implemented in any language without depending on
numpy's generator internals.

Reference algorithm: Steele, Lea & Flood, "Fast splittable pseudorandom
number generators" (the standard splitmix64 mixing constants).
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """One splitmix64 output step for a 64-bit state value."""
    z = (z + _GAMMA) & _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def _fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & _MASK
    return h


class SplitMix64:
    """Stateful splitmix64 stream with helpers for floats and shuffles."""

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK
        return z ^ (z >> 31)

    def next_float(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def uniform(self, low: float, high: float, size) -> np.ndarray:
        """Array of uniforms in [low, high), consuming one draw per element."""
        n = int(np.prod(size))
        base = np.uint64(self._state) + np.uint64(_GAMMA) * np.arange(1, n + 1, dtype=np.uint64)
        self._state = (self._state + _GAMMA * n) & _MASK
        z = base
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        z = z ^ (z >> np.uint64(31))
        u = (z >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return (low + (high - low) * u).reshape(size)

    def shuffle(self, n: int) -> np.ndarray:
        """Fisher-Yates permutation of range(n)."""
        perm = np.arange(n)
        for i in range(n - 1, 0, -1):
            j = self.next_u64() % (i + 1)
            perm[i], perm[j] = perm[j], perm[i]
        return perm

    def derive(self, label: str) -> "SplitMix64":
        """Independent child stream named by ``label``.

        Child seed mixes the parent's next output with an FNV-1a hash of the
        label, so streams for different purposes never overlap.
        """
        return SplitMix64(mix64(self.next_u64() ^ _fnv1a64(label)))
