"""Seeded random streams.

Every simulation takes an explicit 64-bit seed.  A session splits its seed
into independent named child streams so that, for example, an attacked run
and its baseline draw identical bits and photon numbers for Alice.
"""
from __future__ import annotations

import numpy as np

SEED_MAX = 2**64 - 1

# Order matters: appending new names is backward compatible, reordering is not.
SESSION_STREAMS = ("alice", "channel", "bob", "eve")


def check_seed(seed: int) -> int:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise TypeError(f"seed must be an integer, got {type(seed).__name__}")
    seed = int(seed)
    if not 0 <= seed <= SEED_MAX:
        raise ValueError(f"seed must be in [0, 2**64), got {seed}")
    return seed


def make_rng(seed: int) -> np.random.Generator:
    """Return a PCG64 generator for ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(check_seed(seed))))


def session_streams(seed: int) -> dict[str, np.random.Generator]:
    """Split ``seed`` into the independent per-role streams of one session."""
    children = np.random.SeedSequence(check_seed(seed)).spawn(len(SESSION_STREAMS))
    return {
        name: np.random.Generator(np.random.PCG64(child))
        for name, child in zip(SESSION_STREAMS, children)
    }


def spawn_seeds(seed: int, count: int) -> list[int]:
    """Derive ``count`` independent 64-bit seeds from one master seed."""
    ss = np.random.SeedSequence(check_seed(seed))
    return [int(child.generate_state(1, np.uint64)[0]) for child in ss.spawn(count)]
