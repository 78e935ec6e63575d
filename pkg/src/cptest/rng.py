"""Deterministic random-stream derivation.

Every piece of randomness in the package flows through a named substream
derived from one non-negative master seed: ``stream(seed, b, 0)`` for the
label shuffle of permutation ``b``, ``stream(seed, b, 1)`` for classifier
randomness, and so on.  Substreams are keyed, not sequential, so any unit
of work can be computed in isolation and results never depend on execution
order or worker count.  The bit generator is Philox (counter-based).
"""

from __future__ import annotations

import numpy as np


def _entropy(seed: int, path: tuple) -> list[int]:
    if seed < 0:
        raise ValueError("master seed must be a non-negative integer")
    return [int(seed)] + [int(x) for x in path]


def stream(seed: int, *path: int) -> np.random.Generator:
    """Return the generator for substream ``(seed, *path)``."""
    ss = np.random.SeedSequence(_entropy(seed, path))
    return np.random.Generator(np.random.Philox(ss))


def seed_int(seed: int, *path: int) -> int:
    """Return a 63-bit integer seed identifying substream ``(seed, *path)``.

    Used where an API takes a plain integer seed instead of a generator;
    ``stream(seed_int(s, a), b)`` and ``stream(s, a, b)`` are distinct but
    both deterministic.
    """
    ss = np.random.SeedSequence(_entropy(seed, path))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))
