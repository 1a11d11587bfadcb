"""Deterministic seed splitting.

Every random choice in the library derives from one 64-bit master seed.
A child seed is the first 8 bytes of BLAKE2b over the master seed and a
path of labels, so adding a new consumer never shifts existing streams.
"""

from __future__ import annotations

import hashlib
import random

import numpy as np

MASK64 = (1 << 64) - 1


def derive_seed(master: int, *labels) -> int:
    h = hashlib.blake2b(digest_size=8)
    h.update(int(master & MASK64).to_bytes(8, "little"))
    for label in labels:
        h.update(b"\x1f")
        h.update(str(label).encode())
    return int.from_bytes(h.digest(), "little")


def python_rng(master: int, *labels) -> random.Random:
    return random.Random(derive_seed(master, *labels))


def numpy_rng(master: int, *labels) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, *labels))
