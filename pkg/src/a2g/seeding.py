"""Derived random substreams.

Every random draw in the package comes from a generator built here, keyed by
a master seed, a module tag and integer indices.  Two calls with the same key
give the same stream regardless of call order or thread.
"""

from __future__ import annotations

import os
import zlib

import numpy as np


def tag_id(tag: str) -> int:
    return zlib.crc32(tag.encode("utf-8"))


def substream(seed: int, tag: str, *indices: int) -> np.random.Generator:
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    key = (tag_id(tag),) + tuple(int(i) for i in indices)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=key)))


def resolve_seed(seed: int | None) -> int | None:
    """Return ``seed`` or fall back to the ``A2G_SEED`` environment variable."""
    if seed is not None:
        return int(seed)
    env = os.environ.get("A2G_SEED")
    if env is None or env.strip() == "":
        return None
    return int(env)
