"""Deterministic derivation of independent RNG streams.

One root seed governs a run; every consumer derives its own stream from
``(seed, *tags)`` so that, for example, resizing the pilot draw never
perturbs the sample draw. String tags are hashed with SHA-256 (Python's
builtin ``hash`` is salted per process and would break reproducibility).
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _tag_to_int(tag: object) -> int:
    if isinstance(tag, (int, np.integer)):
        return int(tag) & _MASK64
    digest = hashlib.sha256(str(tag).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def derive_seed(seed: int, *tags: object) -> int:
    """Collapse a (seed, tags...) path into a single 64-bit child seed."""
    material = ",".join(str(_tag_to_int(t)) for t in (seed, *tags))
    digest = hashlib.sha256(material.encode("ascii")).digest()
    return int.from_bytes(digest[:8], "big")


def spawn_rng(seed: int, *tags: object) -> np.random.Generator:
    """Create a generator on the stream identified by (seed, tags...)."""
    entropy = [int(seed) & _MASK64] + [_tag_to_int(t) for t in tags]
    return np.random.default_rng(np.random.SeedSequence(entropy))
