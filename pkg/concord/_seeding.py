"""Deterministic seed derivation.

All randomness in concord flows from a single master seed. Child streams are keyed by small integers (realization
index, instrument count, restart index, ...) and mixed with the SplitMix64 finaliser, so each unit of work owns an
independent, reproducible ``numpy.random.Generator``.
"""
from numbers import Integral

import numpy as np

from ._utils import check_seed, check_type

_MASK64 = (1 << 64) - 1
_GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def _splitmix64(x: int) -> int:
    x = (x + _GOLDEN_GAMMA) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(master_seed: int, *keys: int) -> int:
    """Mix ``master_seed`` with any number of integer keys into a new unsigned 64-bit seed.

    Parameters
    ----------
    master_seed : int
        Unsigned 64-bit master seed.
    *keys : int
        Integer keys identifying the child stream. Negative keys are folded into 64 bits.

    Returns
    -------
    int
    """
    check_seed("master_seed", master_seed)
    state = _splitmix64(int(master_seed))
    for position, key in enumerate(keys):
        check_type(f"keys[{position}]", key, Integral)
        state = _splitmix64(state ^ (int(key) & _MASK64))
    return state


def derive_stream_seed(master_seed: int, realization_index: int, instrument_count: int) -> int:
    """Seed of the random stream owned by one (realization, instrument count) unit of a simulation sweep."""
    return derive_seed(master_seed, realization_index, instrument_count)


def make_rng(seed: int) -> np.random.Generator:
    check_seed("seed", seed)
    return np.random.default_rng(int(seed))
