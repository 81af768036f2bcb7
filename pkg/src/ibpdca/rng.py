"""Portable random streams: splitmix64-seeded xoshiro256++.

Uniforms use the top 53 bits of each 64-bit output.  Normals come from the
polar (Marsaglia) Box-Muller method and are produced in pairs; a request for
an odd count discards the second member of the final pair, so every call
starts on a fresh pair.  The loops are compiled with numba because the
generator state is inherently sequential.
"""

from __future__ import annotations

import numba
import numpy as np

__all__ = ["Xoshiro256pp", "splitmix64_seed"]

_MASK = (1 << 64) - 1


def splitmix64_seed(seed):
    """Expand a 64-bit seed into four xoshiro words."""
    x = int(seed) & _MASK
    out = []
    for _ in range(4):
        x = (x + 0x9E3779B97F4A7C15) & _MASK
        z = x
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        out.append(z ^ (z >> 31))
    return np.array(out, dtype=np.uint64)


@numba.njit(cache=True)
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@numba.njit(cache=True)
def _next(s):
    result = _rotl(s[0] + s[3], 23) + s[0]
    t = s[1] << np.uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


@numba.njit(cache=True)
def _uniform(s):
    return np.float64(_next(s) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@numba.njit(cache=True)
def _fill_uint64(s, out):
    for i in range(out.size):
        out[i] = _next(s)


@numba.njit(cache=True)
def _fill_uniform(s, out):
    for i in range(out.size):
        out[i] = _uniform(s)


@numba.njit(cache=True)
def _fill_normal(s, out):
    n = out.size
    i = 0
    while i < n:
        u = 2.0 * _uniform(s) - 1.0
        v = 2.0 * _uniform(s) - 1.0
        q = u * u + v * v
        if q >= 1.0 or q == 0.0:
            continue
        f = np.sqrt(-2.0 * np.log(q) / q)
        out[i] = u * f
        if i + 1 < n:
            out[i + 1] = v * f
        i += 2


@numba.njit(cache=True)
def _partial_shuffle(s, n, k):
    perm = np.arange(n)
    for i in range(k):
        j = i + np.int64(_uniform(s) * (n - i))
        tmp = perm[i]
        perm[i] = perm[j]
        perm[j] = tmp
    return perm[:k].copy()


class Xoshiro256pp:
    """Sequential xoshiro256++ stream."""

    def __init__(self, seed):
        self.state = splitmix64_seed(seed)

    def uint64(self, size):
        out = np.empty(size, dtype=np.uint64)
        _fill_uint64(self.state, out)
        return out

    def uniform(self, size):
        out = np.empty(size, dtype=np.float64)
        _fill_uniform(self.state, out)
        return out

    def normal(self, size):
        out = np.empty(size, dtype=np.float64)
        _fill_normal(self.state, out)
        return out

    def sample_without_replacement(self, n, k):
        """First ``k`` entries of a Fisher-Yates shuffle of ``range(n)``.

        Positions are drawn as ``i + floor(U * (n - i))``, one uniform per
        position, with no rejection step.
        """
        if not 0 <= k <= n:
            raise ValueError("need 0 <= k <= n")
        return _partial_shuffle(self.state, int(n), int(k))
