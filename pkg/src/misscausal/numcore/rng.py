"""Labelled, seeded random streams.

A stream is identified by ``(seed, label)``; the label is hashed into the
seed sequence so that independent parts of a run (data generation, edge
sampling, minibatching, ...) draw from decorrelated generators that do not
shift when another part consumes more numbers.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _label_words(label: str) -> tuple[int, ...]:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return tuple(int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4))


class RngStream:
    def __init__(self, seed: int, label: str = "root"):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self.label = label
        ss = np.random.SeedSequence(entropy=seed, spawn_key=_label_words(label))
        self.gen = np.random.Generator(np.random.PCG64(ss))

    def child(self, label: str) -> "RngStream":
        return RngStream(self.seed, f"{self.label}/{label}")

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, label={self.label!r})"

    # thin wrappers over numpy's Generator
    def random(self, size=None) -> np.ndarray:
        return self.gen.random(size)

    def normal(self, loc=0.0, scale=1.0, size=None) -> np.ndarray:
        return self.gen.normal(loc, scale, size)

    def uniform(self, low=0.0, high=1.0, size=None) -> np.ndarray:
        return self.gen.uniform(low, high, size)

    def integers(self, low, high=None, size=None) -> np.ndarray:
        return self.gen.integers(low, high, size)

    def permutation(self, n) -> np.ndarray:
        return self.gen.permutation(n)

    def choice(self, a, size=None, replace=True) -> np.ndarray:
        return self.gen.choice(a, size=size, replace=replace)

    def bernoulli(self, p, size=None) -> np.ndarray:
        p = np.asarray(p, dtype=np.float64)
        shape = p.shape if size is None else size
        return (self.gen.random(shape) < p).astype(np.int8)
