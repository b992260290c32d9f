"""Seeded random streams.

Every consumer draws from its own Philox-4x64 stream (numpy's counter-based
bit generator). A stream is keyed by the 64-bit run seed plus a tuple of
names; names are folded into the key with CRC-32, integers are used as-is.
Two streams with different name tuples are statistically independent, and a
given (seed, names) pair always yields the same bytes.
"""

from __future__ import annotations

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _word(name: str | int) -> int:
    if isinstance(name, (int, np.integer)):
        return int(name) & _MASK64
    return zlib.crc32(str(name).encode("utf-8"))


def stream(seed: int, *names: str | int) -> np.random.Generator:
    key = [int(seed) & _MASK64] + [_word(n) for n in names]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))
