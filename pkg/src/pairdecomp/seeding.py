"""Deterministic seed splitting for recursive randomized constructions."""
from __future__ import annotations

import numpy as np


def derive_seed(seed: int, branch: int) -> int:
    """Child seed for recursion branch ``branch`` of a node seeded ``seed``.

    Depends only on the two integers, so sibling subproblems can run in
    any order (or be skipped) without changing each other's randomness.
    """
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(branch)])
    return int(ss.generate_state(1, np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(int(seed) & 0xFFFFFFFFFFFFFFFF)
