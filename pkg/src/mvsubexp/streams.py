"""Seeded, splittable random streams.

A stream is the pair ``(seed, index)``.  The pair is pushed through the
SplitMix64 finalizer (Steele, Lea & Flood 2014) to form a 128-bit key that
seeds a PCG64 generator (period 2**128).  Children are derived the same way,
so a tree of streams can be handed to workers without coordination and the
draws depend only on the position of a stream in the tree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    """SplitMix64 avalanche finalizer on a 64-bit integer."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_key(seed: int, index: int) -> int:
    """Mix ``(seed, index)`` into a 64-bit key."""
    return mix64(mix64(seed + GOLDEN_GAMMA) ^ mix64((index + 1) * GOLDEN_GAMMA))


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream identified by a master seed and an index.

    Identical ``(seed, index)`` pairs always reproduce identical draws;
    distinct indices give statistically independent streams.
    """

    seed: int
    index: int = 0

    def __post_init__(self):
        if not (0 <= int(self.seed) <= MASK64):
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if int(self.index) < 0:
            raise ValueError("stream index must be nonnegative")

    @property
    def key(self) -> int:
        return derive_key(int(self.seed), int(self.index))

    def generator(self) -> np.random.Generator:
        hi = self.key
        lo = mix64(hi ^ GOLDEN_GAMMA)
        return np.random.Generator(np.random.PCG64((hi << 64) | lo))

    def spawn(self, index: int) -> "RngStream":
        """Child stream number ``index`` of this stream."""
        return RngStream(self.key, int(index))

    def spawn_many(self, count: int) -> list["RngStream"]:
        return [self.spawn(i) for i in range(count)]


def as_stream(stream) -> RngStream:
    if isinstance(stream, RngStream):
        return stream
    if isinstance(stream, (int, np.integer)):
        return RngStream(int(stream))
    raise TypeError(f"expected RngStream or int seed, got {type(stream).__name__}")
