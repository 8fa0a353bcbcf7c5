"""Seed derivation for reproducible runs.

All randomness in the package flows through numpy's PCG64 generator. A single
64-bit master seed is expanded into independent per-purpose streams by feeding
``SeedSequence`` with the master seed followed by a purpose code and optional
integer indices (replica number, repeat number, pseudo-experiment number, ...).
The rule is purely arithmetic, so any sub-stream of a run can be reconstructed
without replaying the rest of the run.
"""

from __future__ import annotations

import numpy as np

# Fixed purpose codes. Never reorder or reuse: results files reference streams
# by (master_seed, purpose, indices).
PURPOSE = {
    "target-spec": 1,
    "target-sample": 2,
    "model-init": 3,
    "train": 4,
    "flow-sample": 5,
    "eval-repeat": 6,
    "pseudo-experiment": 7,
    "directions": 8,
    "generic": 9,
}

_U64 = 0xFFFFFFFFFFFFFFFF


def _entropy(master_seed: int, purpose: str, indices: tuple[int, ...]) -> list[int]:
    if purpose not in PURPOSE:
        raise ValueError(f"unknown seed purpose {purpose!r}")
    return [int(master_seed) & _U64, PURPOSE[purpose], *[int(i) & _U64 for i in indices]]


def seed_sequence(master_seed: int, purpose: str, *indices: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(_entropy(master_seed, purpose, indices))


def stream(master_seed: int, purpose: str, *indices: int) -> np.random.Generator:
    """Return a PCG64 generator for one (purpose, indices) sub-stream."""
    return np.random.Generator(np.random.PCG64(seed_sequence(master_seed, purpose, *indices)))


def child_seed(master_seed: int, purpose: str, *indices: int) -> int:
    """Collapse a sub-stream to a single 64-bit seed (for serialized configs)."""
    state = seed_sequence(master_seed, purpose, *indices).generate_state(2, np.uint32)
    return int(state[0]) << 32 | int(state[1])
