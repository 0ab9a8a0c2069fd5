"""Counter-based random streams.

Every sampler in the package is a pure function of its parameters and an
RngStream value, so any draw can be replayed bit-for-bit and independent
replications can run in parallel without coordination.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GENERATOR_NAME = "philox4x64 (numpy.random.Philox via SeedSequence)"


@dataclass(frozen=True)
class RngStream:
    """Addressable random stream: (seed, stream_id) plus an optional child path.

    Identical values reproduce identical draw sequences; distinct stream ids
    (or child paths) give statistically independent streams.
    """

    seed: int
    stream_id: int = 0
    path: tuple[int, ...] = field(default=())

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id, *self.path))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, *indices: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id, self.path + tuple(indices))

    def describe(self) -> dict:
        return {
            "seed": self.seed,
            "stream_id": self.stream_id,
            "path": list(self.path),
            "generator": GENERATOR_NAME,
            "numpy": np.__version__,
        }
