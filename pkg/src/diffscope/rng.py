"""Counter-based random numbers for path simulation.

Draw ``k`` of path ``p`` under seed ``s`` is ``mix(key(s, p) + (k + 1) * G)``
where ``mix`` is the SplitMix64 finalizer and ``G`` the 64-bit golden-ratio
increment.  Any draw can therefore be computed without touching the others,
so results do not depend on how paths are scheduled across threads.
"""

from __future__ import annotations

import numpy as np
from numba import njit

__all__ = ["GOLDEN", "mix64", "stream_key", "uniform_at", "reference_uniform"]

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_PATH_MULT = np.uint64(0xD1B54A32D192ED03)
_S30, _S27, _S31, _S11 = np.uint64(30), np.uint64(27), np.uint64(31), np.uint64(11)
_TWO53 = 1.0 / 9007199254740992.0


@njit(cache=True, inline="always")
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True)
def stream_key(seed, path):
    # explicit casts: numba promotes int64 (+) uint64 to float64
    return mix64(mix64(np.uint64(seed) + GOLDEN) ^ (np.uint64(path) * _PATH_MULT))


@njit(cache=True, inline="always")
def uniform_at(key, counter):
    """Uniform double in [0, 1) with 53 random bits."""
    z = mix64(np.uint64(key) + (np.uint64(counter) + np.uint64(1)) * GOLDEN)
    return np.float64(z >> _S11) * _TWO53


_MASK = (1 << 64) - 1


def _mix_py(z):
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def reference_uniform(seed, path, counter):
    """Plain-integer implementation of the same stream, for testing."""
    key = _mix_py(_mix_py((seed + 0x9E3779B97F4A7C15) & _MASK) ^ ((path * 0xD1B54A32D192ED03) & _MASK))
    z = _mix_py((key + (counter + 1) * 0x9E3779B97F4A7C15) & _MASK)
    return (z >> 11) / 9007199254740992.0
