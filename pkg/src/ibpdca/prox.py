"""Closed-form proximal maps, projections and Clarke Jacobian selections.

Everything here is separable or radial, so each map has an explicit formula
and an explicit element of its generalized Jacobian.  The Jacobian selections
are what the semi-smooth Newton solvers use to assemble Newton systems.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DiagMask",
    "BallJacobian",
    "soft_threshold",
    "prox_box_l1",
    "project_l2_ball",
    "clarke_mask_l1",
    "clarke_mask_box_l1",
    "ball_jacobian",
]


def _finite(x, name):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains NaN or Inf")
    return x


def _nonneg(value, name, strict=False):
    value = float(value)
    if not np.isfinite(value) or value < 0 or (strict and value == 0):
        bound = "positive" if strict else "nonnegative"
        raise ValueError(f"{name} must be a finite {bound} scalar, got {value}")
    return value


@dataclass(frozen=True)
class DiagMask:
    """0/1 diagonal of a Clarke Jacobian element of a separable prox map."""

    d: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float)
        if not np.all((d == 0.0) | (d == 1.0)):
            raise ValueError("mask entries must be exactly 0 or 1")
        object.__setattr__(self, "d", d)

    @property
    def active(self) -> np.ndarray:
        """Indices with ``d_i = 1``."""
        return np.flatnonzero(self.d)

    def apply(self, v):
        return self.d * np.asarray(v, dtype=float)

    def dense(self):
        return np.diag(self.d)


def soft_threshold(y, nu):
    """Componentwise ``sign(y) * max(|y| - nu, 0)``.

    This is the proximal map of ``nu * ||.||_1``.
    """
    y = _finite(y, "y")
    nu = _nonneg(nu, "nu")
    return np.sign(y) * np.maximum(np.abs(y) - nu, 0.0)


def prox_box_l1(y, nu, M):
    """Proximal map of ``nu * ||.||_1`` plus the indicator of ``[-M, M]^n``.

    Both pieces are separable and the box is symmetric, so the minimizer is
    the soft-thresholded value clamped to the box.
    """
    M = _nonneg(M, "M", strict=True)
    return np.clip(soft_threshold(y, nu), -M, M)


def project_l2_ball(u, kappa):
    """Euclidean projection onto ``{x : ||x|| <= kappa}``."""
    u = _finite(u, "u")
    kappa = _nonneg(kappa, "kappa", strict=True)
    nrm = np.linalg.norm(u)
    if nrm <= kappa:
        return u.copy()
    return (kappa / nrm) * u


def clarke_mask_l1(v, nu):
    """Jacobian selection of ``soft_threshold(., nu)`` at ``v``.

    Ties ``|v_i| = nu`` get ``d_i = 0``.
    """
    v = _finite(v, "v")
    nu = _nonneg(nu, "nu", strict=True)
    return DiagMask((np.abs(v) > nu).astype(float))


def clarke_mask_box_l1(v, nu, M):
    """Jacobian selection of ``prox_box_l1(., nu, M)`` at ``v``.

    A coordinate is active only when it clears the dead zone and the
    soft-thresholded value lies strictly inside the box.  Both tie cases
    resolve to 0.
    """
    v = _finite(v, "v")
    nu = _nonneg(nu, "nu", strict=True)
    M = _nonneg(M, "M", strict=True)
    a = np.abs(v)
    return DiagMask(((a > nu) & (a - nu < M)).astype(float))


@dataclass(frozen=True)
class BallJacobian:
    """Element of the Clarke Jacobian of the projection onto an l2 ball.

    ``case`` is ``"identity"`` inside the ball, ``"exterior"`` outside and
    ``"boundary"`` on the sphere, where the selection ``I - u u^T / kappa^2``
    (the limit from outside) is used.
    """

    case: str
    u: np.ndarray
    kappa: float

    def apply(self, v):
        v = np.asarray(v, dtype=float)
        if self.case == "identity":
            return v.copy()
        unorm2 = float(self.u @ self.u)
        proj = self.u * ((self.u @ v) / unorm2)
        if self.case == "boundary":
            return v - proj
        return (self.kappa / np.sqrt(unorm2)) * (v - proj)

    def dense(self):
        n = self.u.size
        if self.case == "identity":
            return np.eye(n)
        unorm2 = float(self.u @ self.u)
        P = np.eye(n) - np.outer(self.u, self.u) / unorm2
        if self.case == "boundary":
            return P
        return (self.kappa / np.sqrt(unorm2)) * P

    def diagonal(self):
        if self.case == "identity":
            return np.ones(self.u.size)
        unorm2 = float(self.u @ self.u)
        diag = 1.0 - self.u**2 / unorm2
        if self.case == "boundary":
            return diag
        return (self.kappa / np.sqrt(unorm2)) * diag


def ball_jacobian(u, kappa):
    u = _finite(u, "u")
    kappa = _nonneg(kappa, "kappa", strict=True)
    nrm = np.linalg.norm(u)
    if nrm < kappa:
        case = "identity"
    elif nrm > kappa:
        case = "exterior"
    else:
        case = "boundary"
    return BallJacobian(case, u.copy(), kappa)
