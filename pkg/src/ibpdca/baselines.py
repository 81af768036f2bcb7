"""First-order baselines: FISTA (used as an initializer) and pDCAe.

pDCAe is the proximal DC algorithm with extrapolation applied to the
regularized problem with the split ``f = 0.5*||Ax - b||^2``,
``P1 = lam*||x||_1`` and ``P2 = lam*||x||``:

    y     = x_k + beta_k (x_k - x_{k-1})
    x_k+1 = soft(y - (A^T(A y - b) - xi_k) / L_A, lam / L_A)

The extrapolation weights follow the FISTA theta-sequence, reset every
``restart_period`` iterations and whenever
``<y_{k-1} - x_k, x_k - x_{k-1}> > 0``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import core
from .errors import NoConvergence
from .prox import soft_threshold

__all__ = ["power_method_lmax", "fista_l1ls", "PdcaeParams", "pdcae_solve"]


def power_method_lmax(A, tol=1e-8, max_it=10000, seed=0):
    """Upper estimate of ``lambda_max(A^T A)``.

    Iterates until the Rayleigh-quotient residual ``||A^T A v - r v|| / r``
    drops below ``tol`` and returns ``r * (1 + 10 * tol)``.
    """
    A = np.asarray(A, dtype=float)
    if not A.any():
        raise ValueError("A must be nonzero")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    for _ in range(max_it):
        w = A.T @ (A @ v)
        r = float(v @ w)
        if r > 0 and np.linalg.norm(w - r * v) <= tol * r:
            return r * (1.0 + 10.0 * tol)
        v = w / np.linalg.norm(w)
    raise NoConvergence(f"power method did not converge in {max_it} iterations")


def _l1ls_value(A, b, lam, x):
    r = A @ x - b
    return 0.5 * float(r @ r) + lam * float(np.abs(x).sum())


def fista_l1ls(A, b, lam, iters=200, L0=1.0, eta=2.0):
    """``iters`` steps of FISTA with backtracking on
    ``min lam*||x||_1 + 0.5*||Ax - b||^2`` from the origin."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    n = A.shape[1]
    x = np.zeros(n)
    y = x.copy()
    t = 1.0
    L = float(L0)
    for _ in range(iters):
        ry = A @ y - b
        fy = 0.5 * float(ry @ ry)
        gy = A.T @ ry
        while True:
            x_new = soft_threshold(y - gy / L, lam / L)
            d = x_new - y
            r_new = A @ x_new - b
            if 0.5 * float(r_new @ r_new) <= fy + float(gy @ d) + 0.5 * L * float(d @ d):
                break
            L *= eta
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y = x_new + ((t - 1.0) / t_new) * (x_new - x)
        x, t = x_new, t_new
    return x


@dataclass
class PdcaeParams:
    L_A: float
    restart: str = "both"  # "fixed", "adaptive" or "both"
    restart_period: int = 200
    max_iter: int = 30000
    tol_x: float = 1e-7
    tol_f: float = 1e-10
    consecutive_required: int = 3
    extrapolate: bool = True

    def __post_init__(self):
        if not self.L_A > 0:
            raise ValueError("L_A must be positive")
        if self.restart not in ("fixed", "adaptive", "both"):
            raise ValueError(f"unknown restart rule {self.restart!r}")


def pdcae_solve(p, params, x0):
    """Run pDCAe on a :class:`~ibpdca.l12reg.RegProblem`."""
    A, b, lam, L = p.A, p.b, p.lam, params.L_A
    x = np.array(x0, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("x0 must be finite")
    x_prev = x.copy()
    y_prev = None
    theta = 1.0
    F = p.objective(x)
    F0 = F
    rule = core.TerminationRule(params.tol_x, params.tol_f,
                                params.consecutive_required)
    status = core.MAX_ITER
    traj = []
    t_start = time.perf_counter()
    for k in range(params.max_iter):
        restart = False
        if params.restart in ("fixed", "both") and k % params.restart_period == 0:
            restart = True
        if (params.restart in ("adaptive", "both") and y_prev is not None
                and float((y_prev - x) @ (x - x_prev)) > 0):
            restart = True
        if restart:
            theta = 1.0
        theta_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * theta * theta))
        beta = (theta - 1.0) / theta_next if params.extrapolate else 0.0
        theta = theta_next

        xi = core.subgrad_p2_norm(x, lam)
        y = x + beta * (x - x_prev)
        grad = A.T @ (A @ y - b) - xi
        x_new = soft_threshold(y - grad / L, lam / L)
        F_new = p.objective(x_new)
        d = x_new - x
        traj.append(core.IterRecord(
            k=k, objective=F, objective_next=F_new,
            D_fwd=0.5 * float(d @ d), D_bwd=0.5 * float(d @ d),
            sc_lhs=math.nan, sc_rhs=math.nan, inner_iters=0,
            elapsed=time.perf_counter() - t_start, gamma=L, criterion="pDCAe",
            delta_norm=0.0, delta_scalar=0.0, stationarity=math.nan))
        verdict = rule.update(x_new, x, F_new, F)
        x_prev, x, F, y_prev = x, x_new, F_new, y
        if verdict is not None:
            status = verdict
            break
    return core.SolveReport(status, x, traj, F0, time.perf_counter() - t_start,
                            criterion="pDCAe", sigma=math.nan)
