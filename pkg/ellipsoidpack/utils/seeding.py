"""Counter-based random streams derived from (seed, trajectory index)."""

from typing import Optional

import numpy as np


MAX_SEED = 2**64 - 1


def validate_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"Seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def stream_id(seed: int, index: Optional[int] = None) -> str:
    """Identifier of the stream for trajectory ``index`` (root stream if None)."""
    return f"{seed}" if index is None else f"{seed}:{index}"


def make_rng(seed: int, index: Optional[int] = None) -> np.random.Generator:
    """
    Philox generator keyed by the seed, with the trajectory index as spawn key.

    Distinct indices give distinct Philox keys, so streams never overlap.
    """
    seed = validate_seed(seed)
    spawn_key = () if index is None else (int(index),)
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=spawn_key)
    return np.random.Generator(np.random.Philox(sequence))
