"""Seed streams derived from one master seed.

A stream is keyed by the master seed plus a path of labels; labels are
mixed with numpy's SeedSequence, so sibling streams are independent and
reproducible regardless of the order in which they are drawn.
"""

from __future__ import annotations

import hashlib
import os
import secrets

import numpy as np


def _label(key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key)
    digest = hashlib.sha256(str(key).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def stream(seed: int, *keys) -> np.random.Generator:
    """Independent generator for (seed, *keys)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_label(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def child_seed(seed: int, *keys) -> int:
    """A 63-bit integer seed derived from (seed, *keys)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_label(k) for k in keys))
    return int(ss.generate_state(2, dtype=np.uint64)[0] >> np.uint64(1))


def fresh_seed() -> int:
    return secrets.randbits(63)


def max_workers() -> int:
    """Parallelism cap from SOFICLAB_THREADS (default 1)."""
    raw = os.environ.get("SOFICLAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1
