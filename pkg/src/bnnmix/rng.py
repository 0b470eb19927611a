"""Counter-based random-stream policy.

Every stochastic operation in the package draws from a stream keyed by
``(master_seed, purpose_tag, index)``.  Streams are independent PCG64
generators derived through :class:`numpy.random.SeedSequence`, so draws are
identical regardless of evaluation order, chunking, or thread count.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np


def _tag_code(tag: str) -> int:
    """Stable 64-bit integer for a purpose tag (platform independent)."""
    digest = hashlib.blake2s(tag.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class RngPolicy:
    """Derives per-(purpose, index) generators from one master seed."""

    master_seed: int

    def generator(self, tag: str, index: int = 0) -> np.random.Generator:
        seq = np.random.SeedSequence(
            self.master_seed, spawn_key=(_tag_code(tag), index)
        )
        return np.random.default_rng(seq)


def stream(seed: int, tag: str, index: int = 0) -> np.random.Generator:
    """Shorthand for ``RngPolicy(seed).generator(tag, index)``."""
    return RngPolicy(seed).generator(tag, index)
