"""Keyed, counter-based random streams.

Streams are derived from a master seed plus an arbitrary key tuple (strings or
integers), so the draws for one user or repetition never depend on the order
in which other users are processed.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _key_word(part) -> int:
    if isinstance(part, (int, np.integer)) and not isinstance(part, bool):
        if part < 0:
            raise ValueError("integer key parts must be non-negative")
        return int(part)
    digest = hashlib.sha256(str(part).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def keyed_rng(seed: int, *key) -> np.random.Generator:
    words = [_key_word(seed)] + [_key_word(p) for p in key]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(words)))
