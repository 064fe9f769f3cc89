"""Named random streams derived from one run seed.

Each component asks for ``stream(seed, "name")``; streams for different
names are statistically independent and adding a new component never
shifts the draws another component sees.
"""

import zlib

import numpy as np


def stream(seed: int, name: str) -> np.random.Generator:
    key = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, key]))


def substream(rng_seed: int, *names) -> np.random.Generator:
    return stream(rng_seed, "/".join(str(n) for n in names))
