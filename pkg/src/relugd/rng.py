"""Seeded, splittable random streams.

Each stream is a Philox-4x64 counter-based generator keyed by
``(seed, stream_key)``. ``stream_key`` packs a fixed per-name offset with an
index, so ``("W", trial=3)`` and ``("Wout", trial=3)`` never overlap and
parallel trials can be generated in any order. Normal variates come from the
Box-Muller transform applied to consecutive pairs of uniforms.
"""
import math

import numpy as np

# fixed key offsets; append only, never renumber
_STREAM_OFFSETS = {
    "W": 1,
    "Wout": 2,
    "data_x": 3,
    "data_radius": 4,
    "data_y": 5,
    "data_resample": 6,
    "gram_mc": 7,
    "probe": 8,
    "test": 9,
}
_INDEX_BITS = 40
_U64 = (1 << 64) - 1


def stream_key(name, index=0):
    """Second Philox key word for the named sub-stream."""
    try:
        offset = _STREAM_OFFSETS[name]
    except KeyError:
        raise KeyError(f"unknown stream name {name!r}") from None
    if not 0 <= index < (1 << _INDEX_BITS):
        raise ValueError(f"stream index {index} out of range")
    return (offset << _INDEX_BITS) | index


def probe_index(name):
    """Stable 40-bit sub-stream index for a probe name (FNV-1a hash)."""
    h = 0xCBF29CE484222325
    for byte in name.encode("utf-8"):
        h ^= byte
        h = (h * 0x100000001B3) & _U64
    return h & ((1 << _INDEX_BITS) - 1)


class Stream:
    """An independent random stream for ``(seed, name, index)``.

    Parameters
    ----------
    seed : int
        Unsigned 64-bit master seed.
    name : str
        Sub-stream name; one of the fixed names in ``_STREAM_OFFSETS``.
    index : int
        Sub-stream index (trial number, dataset number, ...).
    """

    def __init__(self, seed, name, index=0):
        seed = int(seed)
        if not 0 <= seed <= _U64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = seed
        self.name = name
        self.index = index
        key = np.array([seed, stream_key(name, index)], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def uniform(self, size=None):
        """Uniform variates on [0, 1)."""
        return self._gen.random(size)

    def normal(self, size):
        """Standard normal variates via Box-Muller, consumed in pairs."""
        shape = (size,) if isinstance(size, (int, np.integer)) else tuple(size)
        n = math.prod(shape)
        pairs = (n + 1) // 2
        u = self._gen.random(2 * pairs)
        u1 = 1.0 - u[0::2]  # (0, 1], keeps log finite
        u2 = u[1::2]
        r = np.sqrt(-2.0 * np.log(u1))
        angle = 2.0 * math.pi * u2
        z = np.empty(2 * pairs)
        z[0::2] = r * np.cos(angle)
        z[1::2] = r * np.sin(angle)
        return z[:n].reshape(shape)

    def bernoulli(self, p, size):
        """Boolean draws with success probability ``p``."""
        return self._gen.random(size) < p
