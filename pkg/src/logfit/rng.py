"""Deterministic PRNG for trial seeding: xoshiro256** with splitmix64 seeding.

The algorithms are written out here (not taken from a library) so that a
(seed, config) pair maps to bit-identical trial draws on every platform and
library version.  Streams are derived per trial as
sub_seed = splitmix64(root_seed XOR trial_index); the four 64-bit state
words of xoshiro256** are then filled from a splitmix64 chain started at the
sub-seed, which is the seeding procedure recommended for this generator
family.  Distinct trial indices give unrelated streams.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1


def splitmix64(state: int) -> int:
    """One splitmix64 output for the given 64-bit state (state + golden gamma)."""
    z = (state + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK


def derive_subseed(root_seed: int, trial_index: int) -> int:
    """Per-trial 64-bit sub-seed: splitmix64 of (root XOR trial index)."""
    return splitmix64((int(root_seed) ^ int(trial_index)) & _MASK)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK


class Xoshiro256StarStar:
    """xoshiro256** 1.0; 64-bit outputs, 53-bit uniform doubles in [0, 1)."""

    def __init__(self, seed: int):
        # canonical splitmix64 chain: the underlying counter advances by the
        # golden gamma per draw, the mixed output fills one state word
        s = int(seed) & _MASK
        state = []
        for _ in range(4):
            state.append(splitmix64(s))
            s = (s + 0x9E3779B97F4A7C15) & _MASK
        self._s = state

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & _MASK, 7) * 9) & _MASK
        t = (s1 << 17) & _MASK
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def uniform(self, low: float = 0.0, high: float = 1.0) -> float:
        u = (self.next_u64() >> 11) * 2.0**-53
        return low + (high - low) * u

    def uniforms(self, k: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        return np.array([self.uniform(low, high) for _ in range(k)])

    @classmethod
    def from_raw_state(cls, s0: int, s1: int, s2: int, s3: int) -> "Xoshiro256StarStar":
        rng = cls.__new__(cls)
        rng._s = [s & _MASK for s in (s0, s1, s2, s3)]
        return rng


def trial_rng(root_seed: int, trial_index: int) -> Xoshiro256StarStar:
    """Stream for one trial, reproducible from (root seed, trial index) alone."""
    return Xoshiro256StarStar(derive_subseed(root_seed, trial_index))
