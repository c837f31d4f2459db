"""Seeded random streams.

Every random draw in the package comes from a ``numpy.random.Generator``
built from an explicit integer seed plus a spawn key.  Streams with
different keys are statistically independent, so a simulation can hand one
stream to each batch of events and still produce the same result no matter
how the batches are scheduled.
"""

from __future__ import annotations

import numpy as np

__all__ = ["stream"]


def stream(seed: int, *key: int) -> np.random.Generator:
    """Return the generator for ``seed`` at position ``key`` in the spawn tree.

    ``stream(s)`` and ``stream(s, 0)`` are different streams; so are
    ``stream(s, 2, 0)`` and ``stream(s, 2, 1)``.
    """
    if seed is None:
        raise ValueError("an explicit seed is required")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))
