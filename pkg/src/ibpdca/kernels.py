"""Quadratic Bregman kernels.

Two kernels cover both applications: ``phi(x) = ||x||^2 / 2`` and
``phi(x) = ||x||^2 / 2 + ||A x||^2 / 2``.  Both are 1-strongly convex, which
the outer loop uses to turn Bregman gaps into Euclidean ones.
"""

from __future__ import annotations

import numpy as np

__all__ = ["Quadratic", "QuadraticPlusGram", "phi_grad", "bregman_distance"]


class _Kernel:
    #: strong convexity modulus with respect to the Euclidean norm
    mu = 1.0

    def __init__(self, n):
        self.n = int(n)

    def _check(self, *xs):
        out = []
        for x in xs:
            x = np.asarray(x, dtype=float)
            if x.shape != (self.n,):
                raise ValueError(
                    f"expected a vector of length {self.n}, got shape {x.shape}")
            out.append(x)
        return out if len(out) > 1 else out[0]


class Quadratic(_Kernel):
    """``phi(x) = ||x||^2 / 2``."""

    kind = "quadratic"

    def value(self, x):
        x = self._check(x)
        return 0.5 * float(x @ x)

    def grad(self, x):
        return self._check(x).copy()

    def distance(self, x, y):
        x, y = self._check(x, y)
        d = x - y
        return 0.5 * float(d @ d)

    def __repr__(self):
        return f"Quadratic(n={self.n})"


class QuadraticPlusGram(_Kernel):
    """``phi(x) = ||x||^2 / 2 + ||A x||^2 / 2``.

    Only a reference to ``A`` is stored; ``A^T A`` is never formed.
    """

    kind = "quadratic_plus_gram"

    def __init__(self, A):
        A = np.asarray(A, dtype=float)
        if A.ndim != 2:
            raise ValueError("A must be a 2-D array")
        super().__init__(A.shape[1])
        self.A = A

    def value(self, x):
        x = self._check(x)
        Ax = self.A @ x
        return 0.5 * float(x @ x) + 0.5 * float(Ax @ Ax)

    def grad(self, x):
        x = self._check(x)
        return x + self.A.T @ (self.A @ x)

    def distance(self, x, y):
        x, y = self._check(x, y)
        d = x - y
        Ad = self.A @ d
        return 0.5 * float(d @ d) + 0.5 * float(Ad @ Ad)

    def __repr__(self):
        return f"QuadraticPlusGram(m={self.A.shape[0]}, n={self.n})"


def phi_grad(kernel, x):
    return kernel.grad(x)


def bregman_distance(kernel, x, y):
    """``D_phi(x, y) = phi(x) - phi(y) - <grad phi(y), x - y>``."""
    return kernel.distance(x, y)
