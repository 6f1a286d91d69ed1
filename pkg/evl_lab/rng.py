from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np
from numpy.random import Generator, SeedSequence


class Purpose(IntEnum):
    States = 0
    NextStates = 1
    Basis = 2
    Probe = 3
    Episodes = 4


@dataclass(frozen=True)
class Stream:
    """
    A keyed random stream.

    Children are addressed by integer keys rather than spawned in order,
    so the stream for (iteration, purpose, state, action) is the same
    no matter which other streams were drawn first or on which worker.
    """

    seed_sequence: SeedSequence

    @classmethod
    def from_seed(cls, seed: int) -> Stream:
        return cls(SeedSequence(seed))

    def child(self, *key: int) -> Stream:
        ss = self.seed_sequence
        return Stream(
            SeedSequence(
                entropy=ss.entropy,
                spawn_key=(*ss.spawn_key, *(int(k) for k in key)),
                pool_size=ss.pool_size,
            )
        )

    def generator(self) -> Generator:
        return np.random.default_rng(self.seed_sequence)
