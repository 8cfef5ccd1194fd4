"""Deterministic random streams.

Every Monte Carlo path owns its own generator state derived from
``(seed, stream index, purpose)``, so batch results never depend on how
paths are scheduled across threads.  Compiled kernels use xoshiro256**
seeded through the splitmix64 finalizer; Python-level code uses numpy
``Generator`` objects keyed the same way through ``SeedSequence``.
"""

import numpy as np
from numba import njit, uint64

ARRIVALS = 1
DRAWS = 2

_GOLDEN = 0x9E3779B97F4A7C15
_INV_2_53 = 1.0 / 9007199254740992.0
_MASK64 = (1 << 64) - 1


@njit(inline="always", cache=True)
def _rotl(x, k):
    return (x << uint64(k)) | (x >> uint64(64 - k))


@njit(inline="always", cache=True)
def _mix64(z):
    z = (z ^ (z >> uint64(30))) * uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> uint64(27))) * uint64(0x94D049BB133111EB)
    return z ^ (z >> uint64(31))


@njit(cache=True)
def seed_state(state, seed, index, purpose):
    """Fill ``state`` (uint64[4]) for the stream ``(seed, index, purpose)``."""
    x = _mix64(uint64(seed) + uint64(_GOLDEN))
    x = _mix64(x ^ (uint64(index) + uint64(0xD1B54A32D192ED03)))
    x = _mix64(x ^ (uint64(purpose) * uint64(0xA0761D6478BD642F)))
    for i in range(4):
        x = x + uint64(_GOLDEN)
        state[i] = _mix64(x)


@njit(inline="always", cache=True)
def next_u64(s):
    s0 = s[0]
    s1 = s[1]
    s2 = s[2]
    s3 = s[3]
    result = _rotl(s1 * uint64(5), 7) * uint64(9)
    t = s1 << uint64(17)
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s3 = _rotl(s3, 45)
    s[0] = s0
    s[1] = s1
    s[2] = s2
    s[3] = s3
    return result


@njit(inline="always", cache=True)
def next_double(s):
    """Uniform on [0, 1) with 53 random bits."""
    return (next_u64(s) >> uint64(11)) * _INV_2_53


@njit(inline="always", cache=True)
def next_open_double(s):
    """Uniform on (0, 1); safe to take logarithms of."""
    return ((next_u64(s) >> uint64(11)) + 0.5) * _INV_2_53


def as_seed(seed) -> int:
    """Validate a user seed and reduce it to an unsigned 64-bit integer."""
    seed = int(seed)
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return seed & _MASK64


def numpy_rng(seed, *keys) -> np.random.Generator:
    """numpy Generator for the stream ``(seed, *keys)``."""
    ss = np.random.SeedSequence(as_seed(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))
