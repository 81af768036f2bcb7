"""The constrained l1-2 sparse recovery problem.

    min_x  ||x||_1 - mu*||x||   s.t.  ||A x - b|| <= kappa,  ||x||_inf <= M

``P1 = g + indicator{||A x - b|| <= kappa}`` with ``g = ||.||_1 + indicator
of [-M, M]^n``, ``P2 = mu*||x||`` and the kernel
``phi = ||x||^2/2 + ||A x||^2/2``.  With ``s = x_k + xi/gamma``,
``b_k = A x_k - b``, ``q(z) = s - A^T z/gamma`` and ``r(z) = b_k + z/gamma``,
the subproblem dual is

    Psi(z) = <z, b> + (gamma/2)||q||^2 - g(p) - (gamma/2)||p - q||^2
             + (gamma/2)||r||^2 - (gamma/2)||Pi(r) - r||^2
             - (gamma/2)||s||^2 - (gamma/2)||b_k||^2

with ``p = prox_{g/gamma}(q)`` and ``Pi`` the projection onto the
``kappa``-ball; ``grad Psi = -A p + Pi(r) + b``.  ``Psi`` is convex but may
be flat, so Newton systems get a small ridge.

A dual iterate gives ``w = p``, which may violate the ball constraint.  It
is pulled back along the segment towards the strictly feasible
``x_feas = A^+ b`` before the certificate is built.  Under SC2 the (costly)
retraction and certificate are only attempted once ``||grad Psi||`` is
below the right-hand side of the criterion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import core
from .baselines import fista_l1ls
from .errors import (DegenerateBound, InfeasibleCertificate, PrecisionFloor,
                     RankDeficient)
from .kernels import QuadraticPlusGram
from .prox import ball_jacobian, clarke_mask_box_l1, project_l2_ball, prox_box_l1
from .ssn import DualModel, DualPoint, NewtonOperator, SsnParams, ssn_solve

__all__ = [
    "ConProblem",
    "ConCertificateParts",
    "ConDualModel",
    "pseudo_inverse_apply",
    "compute_M",
    "objective_con",
    "dual_value_con",
    "dual_grad_con",
    "con_jacobian_element",
    "retract",
    "con_certificate",
    "con_subsolve",
    "make_subsolver",
    "initial_point",
]

#: feasibility slack tolerated on a retracted point
FEAS_TOL = 1e-10
#: relative excess of ||Aw - b|| over kappa attributed to rounding
BALL_RTOL = 1e-12
#: dual residual (relative to 1 + ||b||) below which SSN progress is noise
NOISE_RTOL = 1e-12


def _gram_factor(A):
    try:
        return scipy.linalg.cho_factor(A @ A.T, lower=True)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise RankDeficient("A A^T is not positive definite") from exc


def pseudo_inverse_apply(A, b, factor=None):
    """``A^T (A A^T)^{-1} b`` for ``A`` with full row rank."""
    A = np.asarray(A, dtype=float)
    factor = factor or _gram_factor(A)
    return A.T @ scipy.linalg.cho_solve(factor, np.asarray(b, dtype=float))


def compute_M(mu, A, b, x_pinv=None):
    """Box bound ``(||A^+ b||_1 - mu*||A^+ b||) / (1 - mu)``."""
    if not 0 <= mu < 1:
        raise ValueError("mu must lie in [0, 1)")
    x = pseudo_inverse_apply(A, b) if x_pinv is None else x_pinv
    if not np.any(x):
        raise DegenerateBound("A^+ b is zero")
    return (np.abs(x).sum() - mu * np.linalg.norm(x)) / (1.0 - mu)


class ConProblem:
    """Constrained problem data.

    ``kappa`` may be given directly.  Otherwise it is ``nf * ||b - A x_orig||``
    when the instance carries ``x_orig`` and ``kappa_c * ||b||`` when not.
    """

    def __init__(self, instance, mu=0.95, kappa=None, nf=1.1, kappa_c=0.1):
        if not 0 <= mu < 1:
            raise ValueError("mu must lie in [0, 1)")
        self.instance = instance
        self.A, self.b = instance.A, instance.b
        self.mu = float(mu)
        if kappa is None:
            kappa = (nf * instance.noise_norm() if instance.x_orig is not None
                     else kappa_c * np.linalg.norm(self.b))
        self.kappa = float(kappa)
        bnorm = np.linalg.norm(self.b)
        if not 0 < self.kappa < bnorm:
            raise ValueError(f"kappa={self.kappa:g} must lie in (0, ||b||={bnorm:g})")
        self._factor = _gram_factor(self.A)
        self.x_feas = pseudo_inverse_apply(self.A, self.b, self._factor)
        self.M = float(compute_M(self.mu, self.A, self.b, self.x_feas))
        self.res_feas = float(np.linalg.norm(self.A @ self.x_feas - self.b))
        if not self.res_feas < self.kappa:
            raise ValueError("A^+ b is not strictly feasible")
        self.kernel = QuadraticPlusGram(self.A)

    @classmethod
    def from_instance(cls, instance, **kw):
        return cls(instance, **kw)

    @property
    def n(self):
        return self.A.shape[1]

    def g(self, x):
        return float(np.abs(x).sum())

    def objective(self, x):
        return objective_con(self, x)[0]

    def violation(self, x):
        return objective_con(self, x)[1]

    def p2_subgradient(self, x):
        return core.subgrad_p2_norm(x, self.mu)


def objective_con(p, x):
    """``(||x||_1 - mu*||x||, constraint violation)``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (p.n,):
        raise ValueError(f"x must have length {p.n}")
    value = float(np.abs(x).sum() - p.mu * np.linalg.norm(x))
    viol = max(np.linalg.norm(p.A @ x - p.b) - p.kappa,
               np.abs(x).max() - p.M, 0.0)
    return value, float(viol)


class ConDualPoint(DualPoint):
    def __init__(self, model, z):
        super().__init__(z)
        self.model = model
        g = model.gamma
        self.q = model.s - (model.A.T @ z) / g
        self.r = model.b_k + z / g
        self.p = prox_box_l1(self.q, 1.0 / g, model.M)
        self.proj = project_l2_ball(self.r, model.kappa)

    def _value(self):
        m, g = self.model, self.model.gamma
        q, r, p = self.q, self.r, self.p
        return (self.z @ m.b + 0.5 * g * (q @ q) - np.abs(p).sum()
                - 0.5 * g * np.sum((p - q) ** 2) + 0.5 * g * (r @ r)
                - 0.5 * g * np.sum((self.proj - r) ** 2) - m.const)

    def _grad(self):
        # -A p + Pi(r) + b, arranged so that no two O(||b||) terms cancel
        m = self.model
        return -(m.A @ (self.p - m.x_k)) - m.b_k + self.proj


class ConDualModel(DualModel):
    needs_regularization = True

    def __init__(self, p, x_k, xi_k, gamma_k):
        if not gamma_k > 0:
            raise ValueError("gamma must be positive")
        self.A, self.b = p.A, p.b
        self.kappa, self.M = p.kappa, p.M
        self.gamma = g = float(gamma_k)
        self.x_k = x_k = np.asarray(x_k, dtype=float)
        self.s = x_k + np.asarray(xi_k, dtype=float) / g
        self.b_k = self.A @ x_k - self.b
        self.noise_floor = NOISE_RTOL * (1.0 + np.linalg.norm(self.b))
        self.const = 0.5 * g * (self.s @ self.s) + 0.5 * g * (self.b_k @ self.b_k)

    @property
    def dim(self):
        return self.A.shape[0]

    def point(self, z):
        return ConDualPoint(self, np.asarray(z, dtype=float))

    def jacobian(self, point):
        J = clarke_mask_box_l1(point.q, 1.0 / self.gamma, self.M).active
        return NewtonOperator(self.A[:, J], 1.0 / self.gamma,
                              extra=ball_jacobian(point.r, self.kappa),
                              dim=self.dim)


def dual_value_con(p, x_k, xi_k, gamma_k, z):
    return ConDualModel(p, x_k, xi_k, gamma_k).value(z)


def dual_grad_con(p, x_k, xi_k, gamma_k, z):
    return ConDualModel(p, x_k, xi_k, gamma_k).gradient(z)


def con_jacobian_element(p, x_k, xi_k, gamma_k, z):
    """``(A_J A_J^T + dPi) / gamma`` without the ridge."""
    model = ConDualModel(p, x_k, xi_k, gamma_k)
    return model.jacobian(model.point(z))


def retract(p, w):
    """Pull ``w`` back into the ball along the segment towards ``x_feas``.

    Returns ``(w_tilde, rho)``; ``rho = 1`` when ``w`` is already feasible.
    A residual within ``kappa * BALL_RTOL`` of the radius counts as feasible:
    that excess is rounding noise, and retracting it would inject an error
    proportional to ``||x_feas||_1`` into the certificate.
    """
    w = np.asarray(w, dtype=float)
    res = np.linalg.norm(p.A @ w - p.b)
    if res <= p.kappa * (1.0 + BALL_RTOL):
        return w.copy(), 1.0
    rho = (p.kappa - p.res_feas) / (res - p.res_feas)
    return rho * w + (1.0 - rho) * p.x_feas, float(rho)


@dataclass
class ConCertificateParts:
    w: np.ndarray
    w_tilde: np.ndarray
    rho: float
    Delta: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    delta1: float
    delta2: float


def _parts(p, model, point):
    g = model.gamma
    w, e = point.p, point.grad
    w_tilde, rho = retract(p, w)
    if (np.linalg.norm(p.A @ w_tilde - p.b) - p.kappa > FEAS_TOL * max(1.0, p.kappa)
            or np.abs(w_tilde).max() - p.M > FEAS_TOL):
        raise InfeasibleCertificate("retracted point violates the constraints")
    dw = w_tilde - w
    Adw = p.A @ dw
    Delta = g * (dw - p.A.T @ e + p.A.T @ Adw)
    d1 = g * (point.q - w)
    # summed per coordinate so that coordinates with dw_i = 0 add nothing
    delta1 = float(np.sum(np.abs(w_tilde) - np.abs(w) - d1 * dw))
    # rounding guard: convexity of g makes delta1 >= 0 in exact arithmetic
    if delta1 < -1e-12 * max(1.0, p.g(w)):
        raise InfeasibleCertificate(f"delta1 = {delta1:.3e} is negative")
    delta1 = max(delta1, 0.0)
    d2 = g * (point.r - point.proj)
    delta2 = abs(float((e - Adw) @ d2))
    return ConCertificateParts(w, w_tilde, rho, Delta, d1, d2, delta1, delta2)


def con_certificate(p, x_k, xi_k, gamma_k, z):
    """Certificate pieces at the dual point ``z``."""
    model = ConDualModel(p, x_k, xi_k, gamma_k)
    return _parts(p, model, model.point(np.asarray(z, dtype=float)))


def con_subsolve(p, x_k, x_prev, xi_k, gamma_k, sigma, criterion, z_warm,
                 ssn_params=None, slack=0.0):
    """Solve one subproblem inexactly; returns a :class:`core.SubsolveResult`.

    ``cert_constructions`` counts how many dual iterates were retracted and
    turned into a candidate certificate.
    """
    ssn_params = ssn_params or SsnParams()
    model = ConDualModel(p, x_k, xi_k, gamma_k)
    z0 = np.zeros(model.dim) if z_warm is None else z_warm
    eps_k = None
    if criterion == core.SC2:
        eps_k = sigma * gamma_k * p.kernel.distance(x_k, x_prev)
    built = 0
    floor = model.noise_floor
    last = [np.inf]
    candidate = None

    def accept(point):
        nonlocal built, candidate
        gnorm = float(np.linalg.norm(point.grad))
        # the gate only saves work; once SSN has stagnated at rounding level
        # the full criterion decides
        stalled = gnorm <= floor and gnorm >= 0.5 * last[0]
        last[0] = gnorm
        if eps_k is not None and gnorm > eps_k + slack and not stalled:
            return None
        built += 1
        parts = _parts(p, model, point)
        candidate = parts.w_tilde
        delta = parts.delta1 + parts.delta2
        lhs = core.certificate_lhs(parts.Delta, delta, parts.w_tilde, x_k)
        rhs = (sigma * gamma_k * p.kernel.distance(parts.w_tilde, x_k)
               if eps_k is None else eps_k)
        if lhs <= rhs + slack:
            return core.ErrorCertificate(parts.w_tilde, parts.Delta, delta,
                                         lhs, rhs, gamma_k, criterion, parts)
        return None

    try:
        res = ssn_solve(model, z0, accept, ssn_params)
    except PrecisionFloor as exc:
        exc.candidate = candidate
        raise
    return core.SubsolveResult(
        certificate=res.payload, z=res.z, inner_iters=res.iters,
        cert_constructions=built, unit_steps=res.unit_steps,
        final_unit_step=bool(res.steps) and res.steps[-1] == 1.0)


def make_subsolver(p, ssn_params=None, slack=0.0):
    def subsolver(x_k, x_prev, xi_k, gamma_k, sigma, criterion, z_warm):
        return con_subsolve(p, x_k, x_prev, xi_k, gamma_k, sigma, criterion,
                            z_warm, ssn_params, slack)
    return subsolver


def initial_point(p, iters=200):
    """FISTA on the l1-regularized least squares problem, then box clamp and
    retraction, giving a feasible starting point."""
    lam0 = 0.01 * np.abs(p.A.T @ p.b).max()
    x = fista_l1ls(p.A, p.b, lam0, iters)
    x = np.clip(x, -p.M, p.M)
    return retract(p, x)[0]
