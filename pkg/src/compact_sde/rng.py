"""Counter-based keyed random numbers.

Every draw is addressed by a 128-bit Philox key and a position in that key's
output stream. Keys are built from ``(seed, purpose, index)`` so that network
initialization, Brownian increments, Karhunen-Loeve coefficients and
analysis sampling never share a stream, and any single draw can be
recomputed without replaying unrelated ones.

Normals are produced one-per-word by inverse-CDF (``ndtri``) so position
``i`` of the normal stream depends on raw word ``i`` only.
"""

from __future__ import annotations

import enum

import numpy as np
from scipy import special

_MASK64 = (1 << 64) - 1


class Purpose(enum.IntEnum):
    NOISE = 1
    INIT = 2
    KL = 3
    SAMPLING = 4
    DERIVE = 5


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(seed: int, *tags: int) -> int:
    """Mix integer tags into a seed, e.g. to give each network of a model its own seed."""
    x = splitmix64(int(seed) & _MASK64)
    for tag in tags:
        x = splitmix64(x ^ splitmix64((int(tag) + int(Purpose.DERIVE)) & _MASK64))
    return x


def _key(seed: int, purpose: Purpose, index: int) -> np.ndarray:
    if not 0 <= int(seed) <= _MASK64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    if not 0 <= int(index) < (1 << 32):
        raise ValueError(f"stream index must fit in 32 bits, got {index}")
    return np.array([int(seed), (int(purpose) << 32) | int(index)], dtype=np.uint64)


class NormalStream:
    """Sequential reader over the normal draws of one keyed stream.

    Reading ``a`` then ``b`` draws yields exactly the first ``a + b`` draws
    of :func:`normals` for the same key.
    """

    def __init__(self, seed: int, purpose: Purpose, index: int):
        self._bitgen = np.random.Philox(key=_key(seed, purpose, index))

    def words(self, count: int) -> np.ndarray:
        return self._bitgen.random_raw(int(count)).astype(np.uint64)

    def uniforms(self, count: int) -> np.ndarray:
        """Uniform draws in the open interval (0, 1), 53 bits each."""
        return ((self.words(count) >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53

    def read(self, count: int) -> np.ndarray:
        return special.ndtri(self.uniforms(count))


def raw_words(seed: int, purpose: Purpose, index: int, count: int) -> np.ndarray:
    """The first ``count`` 64-bit words of stream ``(seed, purpose, index)``."""
    return NormalStream(seed, purpose, index).words(count)


def uniforms(seed: int, purpose: Purpose, index: int, count: int) -> np.ndarray:
    return NormalStream(seed, purpose, index).uniforms(count)


def normals(seed: int, purpose: Purpose, index: int, count: int) -> np.ndarray:
    return NormalStream(seed, purpose, index).read(count)
