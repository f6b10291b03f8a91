"""Keyed random streams.

Every draw is made from a fresh Philox generator keyed by
``(seed, realization, purpose, step)``, so the Wiener and jump streams are
independent of each other, of the order in which realizations run, and of how
many draws earlier steps consumed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

WIENER = 1
JUMP = 2
INITIAL = 3


@dataclass(frozen=True)
class Stream:
    seed: int = 0
    realization: int = 0

    def generator(self, purpose, step=0):
        ss = np.random.SeedSequence([int(self.seed), int(self.realization), int(purpose), int(step)])
        return np.random.Generator(np.random.Philox(ss))
