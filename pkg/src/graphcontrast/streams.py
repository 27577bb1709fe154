"""Deterministic, hierarchically derived random streams.

Every piece of randomness in the library (walks, parameter init, dropout
masks, batch composition) is drawn from a stream addressed by a path of
keys rooted at a single 64-bit seed, e.g. ``(seed, step, slot, "q")``.
Two consequences:

* any sub-computation can be replayed in isolation by rebuilding its path,
* full training state is captured by ``(seed, step)`` alone, which keeps
  checkpoint resume bit-exact without serializing generator internals.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _norm_key(key) -> int:
    """Map a path component (int or str) to a stable unsigned integer."""
    if isinstance(key, (int, np.integer)):
        return int(key) & _MASK64
    if isinstance(key, str):
        digest = hashlib.sha256(key.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "little")
    raise TypeError(f"stream key must be int or str, got {type(key).__name__}")


class RandomStreams:
    """A node in a tree of named random streams.

    ``child(*keys)`` derives a sub-stream; ``generator()`` materializes a
    numpy Generator whose state depends only on the full path.
    """

    __slots__ = ("_path",)

    def __init__(self, *path):
        self._path = tuple(_norm_key(k) for k in path)

    def child(self, *keys) -> "RandomStreams":
        node = RandomStreams()
        node._path = self._path + tuple(_norm_key(k) for k in keys)
        return node

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(self._path)))

    @property
    def path(self) -> tuple:
        return self._path

    def __repr__(self) -> str:
        return f"RandomStreams{self._path!r}"


def as_generator(rng) -> np.random.Generator:
    """Accept either a RandomStreams node or a ready Generator."""
    if isinstance(rng, RandomStreams):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RandomStreams or numpy Generator, got {type(rng).__name__}")
