"""
Named, order-independent random streams derived from one master seed.

``stream(seed, "readout", 3)`` always yields the same generator no matter how
many other streams were created before it or in which thread.
"""

from __future__ import annotations

import hashlib
import logging

import numpy as np

logger = logging.getLogger(__name__)


def _name_key(name: str) -> int:
    return int.from_bytes(hashlib.sha256(name.encode("utf-8")).digest()[:8], "big")


def seed_sequence(master_seed: int, name: str, *indices: int) -> np.random.SeedSequence:
    """Seed sequence for the stream ``name`` at ``indices`` below ``master_seed``."""
    if master_seed < 0 or any(index < 0 for index in indices):
        raise ValueError("seeds and stream indices must be non-negative")
    return np.random.SeedSequence(
        master_seed, spawn_key=(_name_key(name), *(int(i) for i in indices))
    )


def stream(master_seed: int, name: str, *indices: int) -> np.random.Generator:
    """Independent generator for ``name`` and ``indices``."""
    return np.random.default_rng(seed_sequence(master_seed, name, *indices))
