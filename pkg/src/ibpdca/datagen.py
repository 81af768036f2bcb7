"""Seeded synthetic sparse-recovery instances.

A trial is ``b = A x_orig + 0.01 * n_hat``, where ``A`` has i.i.d. standard
normal entries and ``x_orig`` is ``s``-sparse with i.i.d. standard normal
entries on a support drawn uniformly without replacement.

One :class:`~ibpdca.rng.Xoshiro256pp` stream is consumed in this fixed
order:

1. ``m * n`` normals filling ``A`` column by column;
2. ``m`` normals for each all-zero column, if any, in column order;
3. ``s`` uniforms for the support (Fisher-Yates prefix);
4. ``s`` normals for the values of ``x_orig`` on the support, in draw order;
5. ``m`` normals for ``n_hat``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .rng import Xoshiro256pp

__all__ = ["ProblemInstance", "gen_instance", "NOISE_SCALE"]

NOISE_SCALE = 0.01


@dataclass
class ProblemInstance:
    A: np.ndarray
    b: np.ndarray
    x_orig: Optional[np.ndarray] = None
    s: int = 0
    seed: int = 0

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        if self.A.ndim != 2:
            raise ValueError("A must be a matrix")
        if self.b.shape != (self.A.shape[0],):
            raise ValueError(f"b must have length {self.A.shape[0]}")
        if self.x_orig is not None:
            self.x_orig = np.asarray(self.x_orig, dtype=np.float64)
            if self.x_orig.shape != (self.A.shape[1],):
                raise ValueError(f"x_orig must have length {self.A.shape[1]}")

    @property
    def m(self):
        return self.A.shape[0]

    @property
    def n(self):
        return self.A.shape[1]

    def zero_columns(self):
        return np.flatnonzero(~self.A.any(axis=0))

    def noise_norm(self):
        """``||b - A x_orig||``, i.e. ``0.01 * ||n_hat||`` for generated data."""
        if self.x_orig is None:
            raise ValueError("instance has no x_orig")
        return float(np.linalg.norm(self.b - self.A @ self.x_orig))


def gen_instance(m, n, s, seed):
    """Deterministic instance for ``(m, n, s, seed)``."""
    m, n, s = int(m), int(n), int(s)
    if m < 1 or n < 1:
        raise ValueError("m and n must be positive")
    if not 0 < s <= n:
        raise ValueError("need 0 < s <= n")
    rng = Xoshiro256pp(seed)
    A = rng.normal(m * n).reshape((m, n), order="F")
    for j in range(n):
        while not A[:, j].any():
            A[:, j] = rng.normal(m)
    support = rng.sample_without_replacement(n, s)
    x_orig = np.zeros(n)
    x_orig[support] = rng.normal(s)
    noise = rng.normal(m)
    b = A @ x_orig + NOISE_SCALE * noise
    return ProblemInstance(A=A, b=b, x_orig=x_orig, s=s, seed=int(seed))
