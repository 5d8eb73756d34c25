"""Bit-exact pseudo-random numbers.

A xoshiro256** stream seeded through splitmix64. Scalar draws come from the
stream; array draws take one 64-bit key from the stream and expand it with the
splitmix64 counter construction ``mix(key + (i + 1) * GOLDEN)`` so that bulk
generation stays vectorized and reproducible from any language.
"""

from __future__ import annotations

import math

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def _mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def splitmix64(state: int) -> tuple[int, int]:
    """Advance a splitmix64 state; returns ``(new_state, output)``."""
    state = (state + GOLDEN) & MASK64
    return state, _mix64(state)


def fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * 0x100000001B3) & MASK64
    return h


def derive_seed(parent: int, tag: str) -> int:
    """Child seed for a named stage: ``splitmix64(parent xor fnv1a64(tag))``."""
    return splitmix64((int(parent) ^ fnv1a64(tag)) & MASK64)[1]


def key_seed(*parts: int) -> int:
    """Fold a tuple of non-negative integers into one 64-bit seed."""
    state = 0
    for p in parts:
        state, out = splitmix64((state ^ (int(p) & MASK64)) & MASK64)
        state = out
    return state


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


class Rng:
    """xoshiro256** generator seeded from a 64-bit integer via splitmix64."""

    def __init__(self, seed: int):
        state = int(seed) & MASK64
        s = []
        for _ in range(4):
            state, out = splitmix64(state)
            s.append(out)
        self._s = s

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & MASK64, 7) * 9) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def uniform(self) -> float:
        """Float in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def integers(self, n: int) -> int:
        """Unbiased integer in [0, n) by rejection on the top bits."""
        if n <= 0:
            raise ValueError("n must be positive")
        if n == 1:
            return 0
        bits = (n - 1).bit_length()
        while True:
            v = self.next_u64() >> (64 - bits)
            if v < n:
                return v

    def normal(self) -> float:
        u1 = 1.0 - self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates shuffle of ``range(n)``, swapping from the top down."""
        perm = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.integers(i + 1)
            perm[i], perm[j] = perm[j], perm[i]
        return np.asarray(perm, dtype=np.int64)

    def choice(self, n: int, size: int) -> np.ndarray:
        """``size`` independent draws from [0, n), with replacement."""
        return np.asarray([self.integers(n) for _ in range(size)], dtype=np.int64)

    # bulk draws -----------------------------------------------------------

    def _u64_array(self, count: int) -> np.ndarray:
        key = np.uint64(self.next_u64())
        idx = np.arange(1, count + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            return _mix64_array(key + idx * np.uint64(GOLDEN))

    def uniform_array(self, shape) -> np.ndarray:
        count = int(np.prod(shape, dtype=np.int64))
        bits = self._u64_array(count) >> np.uint64(11)
        return (bits.astype(np.float64) * (1.0 / (1 << 53))).reshape(shape)

    def normal_array(self, shape) -> np.ndarray:
        """Box-Muller pairs over two uniform blocks; float64."""
        count = int(np.prod(shape, dtype=np.int64))
        u1 = 1.0 - self.uniform_array((count,))
        u2 = self.uniform_array((count,))
        return (np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)).reshape(shape)
