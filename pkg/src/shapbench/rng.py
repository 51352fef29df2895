"""Seeded, splittable random streams.

Every stochastic routine takes an explicit ``numpy.random.Generator``. Streams
for independent tasks are derived from (seed, labels) so results do not depend
on task execution order.
"""

from __future__ import annotations

import zlib

import numpy as np


def _label_key(label: object) -> int:
    return zlib.crc32(str(label).encode("utf-8"))


def make_rng(seed: int, *labels: object) -> np.random.Generator:
    """Counter-based Philox stream keyed by ``seed`` and any number of labels."""
    seq = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *(_label_key(lab) for lab in labels)])
    return np.random.Generator(np.random.Philox(seq))


def split(rng: np.random.Generator, n: int) -> list[np.random.Generator]:
    return list(rng.spawn(n))
