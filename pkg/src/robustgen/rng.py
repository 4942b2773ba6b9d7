"""Portable random streams.

Everything here is derived from the raw 64-bit output of PCG64 (the
``numpy.random.PCG64`` bit generator, PCG-XSL-RR 128/64) seeded through
``numpy.random.SeedSequence``. Both are specified algorithms whose output is
stable across platforms; the higher-level ``Generator`` methods are not
guaranteed to be, so floats, bounded integers, shuffles and normals are built
here from raw words.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

_TWO_POW_53 = float(2**53)


class Stream:
    """Deterministic random stream keyed by a tuple of non-negative ints."""

    def __init__(self, *key: int):
        if not key:
            key = (0,)
        self.key = tuple(int(k) for k in key)
        self._bits = np.random.PCG64(np.random.SeedSequence(list(self.key)))

    def raw(self, size: int) -> np.ndarray:
        return self._bits.random_raw(size).astype(np.uint64)

    def uniform(self, size: int | tuple = 1, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        shape = (size,) if isinstance(size, int) else tuple(size)
        count = int(np.prod(shape))
        words = self.raw(count) >> np.uint64(11)
        u = words.astype(np.float64) / _TWO_POW_53
        return (low + (high - low) * u).reshape(shape)

    def normal(self, size: int | tuple = 1) -> np.ndarray:
        # Box-Muller on (0, 1] x [0, 1)
        shape = (size,) if isinstance(size, int) else tuple(size)
        count = int(np.prod(shape))
        half = (count + 1) // 2
        u1 = 1.0 - self.uniform(half)
        u2 = self.uniform(half)
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])
        return z[:count].reshape(shape)

    def below(self, bound: int) -> int:
        """Uniform integer in [0, bound) by rejection on raw words."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        limit = (2**64 // bound) * bound
        while True:
            w = int(self.raw(1)[0])
            if w < limit:
                return w % bound

    def signs(self, rows: int, cols: int) -> np.ndarray:
        """Matrix of independent +/-1 entries, one raw bit each."""
        total = rows * cols
        words = self.raw((total + 63) // 64)
        bits = np.unpackbits(words.view(np.uint8), bitorder="little")[:total]
        return (2.0 * bits.astype(np.float64) - 1.0).reshape(rows, cols)

    def sample_indices(self, population: int, k: int) -> np.ndarray:
        """First ``k`` positions of a partial Fisher-Yates shuffle of range(population)."""
        if not 0 <= k <= population:
            raise ValueError(f"cannot draw {k} of {population} without replacement")
        idx = np.arange(population, dtype=np.int64)
        words = self.raw(k).tolist()
        for i in range(k):
            bound = population - i
            limit = (2**64 // bound) * bound
            w = words[i]
            while w >= limit:
                w = int(self.raw(1)[0])
            j = i + w % bound
            idx[i], idx[j] = idx[j], idx[i]
        return idx[:k].copy()

    def permutation(self, n: int) -> np.ndarray:
        return self.sample_indices(n, n)

    def choice(self, options: Sequence):
        return options[self.below(len(options))]
