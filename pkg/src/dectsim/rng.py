"""Named deterministic random streams.

Each stream is seeded from ``(master_seed, crc32(name))`` so consuming draws in
one stream never perturbs another. Per-link propagation draws use a stateless
counter-based hash instead: the value for a given ``(key, a, b, slot)`` is a
pure function of its arguments, so frozen link state never has to be stored.
"""

from __future__ import annotations

import zlib

import numpy as np

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_SA = np.uint64(0xD6E8FEB86659FD93)
_SB = np.uint64(0xA0761D6478BD642F)
_TWO_M53 = 2.0 ** -53


def _stream_id(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


class RngStreams:
    """Factory for independent, named ``numpy.random.Generator`` streams."""

    def __init__(self, master_seed: int):
        self.master_seed = int(master_seed)
        self._streams: dict[str, np.random.Generator] = {}

    def stream(self, name: str) -> np.random.Generator:
        gen = self._streams.get(name)
        if gen is None:
            ss = np.random.SeedSequence(entropy=self.master_seed,
                                        spawn_key=(_stream_id(name),))
            gen = np.random.Generator(np.random.PCG64(ss))
            self._streams[name] = gen
        return gen

    def fresh(self, name: str) -> np.random.Generator:
        """A new generator at the start of stream ``name`` (not cached)."""
        ss = np.random.SeedSequence(entropy=self.master_seed,
                                    spawn_key=(_stream_id(name),))
        return np.random.Generator(np.random.PCG64(ss))

    def key(self, name: str) -> int:
        """64-bit key for counter-based hashing under stream ``name``."""
        ss = np.random.SeedSequence(entropy=self.master_seed,
                                    spawn_key=(_stream_id(name),))
        lo, hi = ss.generate_state(2, np.uint32)
        return (int(hi) << 32) | int(lo)


def _mix64(x: np.ndarray) -> np.ndarray:
    x = (x ^ (x >> np.uint64(30))) * _M1
    x = (x ^ (x >> np.uint64(27))) * _M2
    return x ^ (x >> np.uint64(31))


def hash_uniform(key: int, a, b, slot: int) -> np.ndarray:
    """Uniform draws in (0, 1) keyed by ``(key, a, b, slot)``.

    ``a`` and ``b`` are broadcastable integer arrays (non-negative).
    """
    a = np.asarray(a, dtype=np.uint64)
    b = np.asarray(b, dtype=np.uint64)
    with np.errstate(over="ignore"):
        x = np.uint64(key) ^ (np.uint64(slot + 1) * _GOLDEN)
        x = _mix64(x ^ (a * _SA))
        x = _mix64(x ^ (b * _SB))
    return ((x >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_M53


def hash_normal(key: int, a, b, slot: int) -> np.ndarray:
    """Standard normal draws (Box-Muller over two hashed uniforms)."""
    u1 = hash_uniform(key, a, b, 2 * slot + 1000)
    u2 = hash_uniform(key, a, b, 2 * slot + 1001)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def derive_seed(master_seed: int, *indices: int) -> int:
    """Reproducible 63-bit child seed for sweep point/replication ``indices``."""
    ss = np.random.SeedSequence(entropy=int(master_seed),
                                spawn_key=tuple(int(i) for i in indices))
    lo, hi = ss.generate_state(2, np.uint32)
    return ((int(hi) << 32) | int(lo)) & ((1 << 63) - 1)
