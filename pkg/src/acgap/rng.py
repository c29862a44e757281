"""Seeded, splittable random streams (Philox counter-based bit generator)."""
from __future__ import annotations

import numpy as np


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Independent generator for ``(seed, *stream)``.

    Distinct ``stream`` tuples give statistically independent streams derived
    from one 64-bit ``seed``.
    """
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))
