"""
Deterministic random streams.

Every stream is a numpy `Generator` over PCG64, seeded through a
`SeedSequence` from (seed, purpose, keys…), so the stream of one round or
one component never depends on how many numbers other streams consumed.
"""

from enum import IntEnum

import numpy as np

RNG_ALGORITHM = "numpy.PCG64"


class Purpose(IntEnum):
    ARMS = 0
    NOISE = 1
    PARAMS = 2
    SHUFFLE = 3
    AUDIT = 4
    POLICY = 5


def derived_rng(seed: int, purpose: Purpose, *keys: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, int(purpose), *keys])))
