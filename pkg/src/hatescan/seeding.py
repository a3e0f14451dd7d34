"""Named random substreams derived from a single run seed."""

import zlib

import numpy as np


def substream(seed: int, name: str) -> np.random.Generator:
    """Return a generator for component ``name`` that is independent of the others.

    The stream depends only on ``(seed, name)``, so adding a new consumer never
    perturbs existing ones.
    """
    key = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, key]))
