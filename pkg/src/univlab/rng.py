"""Counter-based random streams.

Every sampling routine takes an explicit stream address. A stream is keyed by
(seed, *ids) through a stable hash into a Philox counter-based generator, so
draws are reproducible bit-for-bit and distinct streams can run on distinct
workers with no shared state or coordination.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

_MASK64 = (1 << 64) - 1


def stream_key(seed: int, *ids: int) -> np.ndarray:
    """Derive a 128-bit Philox key from a seed and a tuple of stream ids."""
    h = hashlib.blake2b(digest_size=16)
    h.update(struct.pack("<q", int(seed) & _MASK64 if seed >= 0 else int(seed)))
    for i in ids:
        h.update(struct.pack("<q", int(i)))
    lo, hi = struct.unpack("<QQ", h.digest())
    return np.array([lo, hi], dtype=np.uint64)


def stream_rng(seed: int, *ids: int) -> np.random.Generator:
    """Fresh deterministic generator for the stream (seed, *ids).

    The same address always reproduces the same draw sequence.
    """
    return np.random.Generator(np.random.Philox(key=stream_key(seed, *ids)))


# Fixed purpose ids so modules never collide on stream addresses.
PURPOSE_PRIMARY = 0
PURPOSE_PRIME = 1
PURPOSE_DOUBLE_PRIME = 2
PURPOSE_INDEX = 3
PURPOSE_GAUSSIAN = 4
PURPOSE_SEARCH = 5
