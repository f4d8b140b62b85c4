"""Counter-based random streams keyed by (seed, label, counter)."""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RngStream:
    seed: int
    label: str
    counter: int = 0

    def generator(self) -> np.random.Generator:
        seed = int(self.seed) & 0xFFFFFFFFFFFFFFFF
        words = [seed & 0xFFFFFFFF, seed >> 32, zlib.crc32(self.label.encode()), int(self.counter) & 0xFFFFFFFF, int(self.counter) >> 32]
        return np.random.Generator(np.random.Philox(np.random.SeedSequence(words)))

    def at(self, counter: int) -> RngStream:
        return RngStream(self.seed, self.label, counter)

    def child(self, label: str) -> RngStream:
        return RngStream(self.seed, f"{self.label}/{label}", self.counter)


def stream(seed: int, label: str, counter: int = 0) -> np.random.Generator:
    return RngStream(seed, label, counter).generator()
