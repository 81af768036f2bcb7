"""The l1-2 regularized least squares problem.

    min_x  F(x) = 0.5 * ||A x - b||^2 + lam * (||x||_1 - ||x||)

DC split: ``P1 = lam*||x||_1 + 0.5*||A x - b||^2`` and ``P2 = lam*||x||``,
with the kernel ``phi = ||x||^2 / 2``.  Each subproblem

    min_x  lam*||x||_1 - <xi, x> + 0.5*||A x - b||^2 + (gamma/2)*||x - x_k||^2

is solved through its dual in ``z`` (one entry per row of ``A``):

    Psi(z) = 0.5*||z||^2 + <z, b> - lam*||p||_1 - (gamma/2)*||p - v||^2
             + (gamma/2)*||v||^2 - (gamma/2)*||x_k||^2,

where ``v = xi/gamma + x_k - A^T z / gamma`` and ``p = soft(v, lam/gamma)``.
``Psi`` is strongly convex with gradient ``-A p + z + b``; at a dual iterate
``w = p`` and ``e = grad Psi`` give the exact certificate
``(x+, Delta, delta) = (w, -A^T e, 0)``.
"""

from __future__ import annotations

import numpy as np

from . import core
from .errors import PrecisionFloor
from .kernels import Quadratic
from .prox import clarke_mask_l1, soft_threshold
from .ssn import DualModel, DualPoint, NewtonOperator, SsnParams, ssn_solve

#: dual residual (relative to 1 + ||b||) below which SSN progress is noise
NOISE_RTOL = 1e-12

__all__ = [
    "RegProblem",
    "RegDualModel",
    "objective_reg",
    "dual_value_reg",
    "dual_grad_reg",
    "reg_jacobian_element",
    "reg_subsolve",
    "make_subsolver",
]


class RegProblem:
    def __init__(self, instance, lam):
        if not lam > 0:
            raise ValueError("lambda must be positive")
        zero = instance.zero_columns()
        if zero.size:
            raise ValueError(f"A has zero columns: {zero[:10].tolist()}")
        self.instance = instance
        self.A = instance.A
        self.b = instance.b
        self.lam = float(lam)
        self.kernel = Quadratic(instance.n)

    @property
    def n(self):
        return self.A.shape[1]

    def objective(self, x):
        return objective_reg(self, x)

    def p2_subgradient(self, x):
        return core.subgrad_p2_norm(x, self.lam)


def objective_reg(p, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (p.n,):
        raise ValueError(f"x must have length {p.n}")
    r = p.A @ x - p.b
    return 0.5 * float(r @ r) + p.lam * (np.abs(x).sum() - np.linalg.norm(x))


class RegDualPoint(DualPoint):
    def __init__(self, model, z):
        super().__init__(z)
        self.model = model
        self.v = model.v_of(z)
        self.p = soft_threshold(self.v, model.nu)

    def _value(self):
        m = self.model
        z, p, v = self.z, self.p, self.v
        g = m.gamma
        return (0.5 * z @ z + z @ m.b - m.lam * np.abs(p).sum()
                - 0.5 * g * np.sum((p - v) ** 2) + 0.5 * g * (v @ v)
                - 0.5 * g * (m.x_k @ m.x_k))

    def _grad(self):
        # -A p + z + b, arranged so that no two O(||b||) terms cancel
        m = self.model
        return -(m.A @ (self.p - m.x_k)) - m.b_k + self.z


class RegDualModel(DualModel):
    """Dual of one regularized subproblem, for fixed ``(x_k, xi_k, gamma_k)``."""

    def __init__(self, p, x_k, xi_k, gamma_k):
        if not gamma_k > 0:
            raise ValueError("gamma must be positive")
        self.A, self.b, self.lam = p.A, p.b, p.lam
        self.x_k = np.asarray(x_k, dtype=float)
        self.gamma = float(gamma_k)
        self.nu = self.lam / self.gamma
        self._shift = np.asarray(xi_k, dtype=float) / self.gamma + self.x_k
        self.b_k = self.A @ self.x_k - self.b
        self.noise_floor = NOISE_RTOL * (1.0 + np.linalg.norm(self.b))

    @property
    def dim(self):
        return self.A.shape[0]

    def v_of(self, z):
        return self._shift - (self.A.T @ z) / self.gamma

    def point(self, z):
        return RegDualPoint(self, np.asarray(z, dtype=float))

    def jacobian(self, point):
        J = clarke_mask_l1(point.v, self.nu).active
        return NewtonOperator(self.A[:, J], 1.0 / self.gamma, shift=1.0)


def dual_value_reg(p, x_k, xi_k, gamma_k, z):
    return RegDualModel(p, x_k, xi_k, gamma_k).value(z)


def dual_grad_reg(p, x_k, xi_k, gamma_k, z):
    return RegDualModel(p, x_k, xi_k, gamma_k).gradient(z)


def reg_jacobian_element(p, x_k, xi_k, gamma_k, z):
    """``I + A_J A_J^T / gamma`` as a :class:`NewtonOperator`."""
    model = RegDualModel(p, x_k, xi_k, gamma_k)
    return model.jacobian(model.point(z))


def _certificate(p, point, x_k, x_prev, gamma, sigma, criterion, slack):
    w = point.p
    delta_vec = -(p.A.T @ point.grad)
    lhs = core.certificate_lhs(delta_vec, 0.0, w, x_k)
    if criterion == core.SC1:
        rhs = sigma * gamma * p.kernel.distance(w, x_k)
    else:
        rhs = sigma * gamma * p.kernel.distance(x_k, x_prev)
    if lhs <= rhs + slack:
        return core.ErrorCertificate(w, delta_vec, 0.0, lhs, rhs, gamma, criterion)
    return None


def reg_subsolve(p, x_k, x_prev, xi_k, gamma_k, sigma, criterion, z_warm,
                 ssn_params=None, slack=0.0):
    """Solve one subproblem inexactly; returns a :class:`core.SubsolveResult`.

    ``slack`` is an absolute allowance added to the right-hand side.  It is
    zero by default and only needed for ``sigma = 0``, where the exact
    inequality ``lhs <= 0`` cannot be reached in floating point.
    """
    ssn_params = ssn_params or SsnParams()
    model = RegDualModel(p, x_k, xi_k, gamma_k)
    z0 = np.zeros(model.dim) if z_warm is None else z_warm
    checks = 0
    last = None

    def accept(point):
        nonlocal checks, last
        checks += 1
        last = point.p
        return _certificate(p, point, x_k, x_prev, gamma_k, sigma, criterion, slack)

    try:
        res = ssn_solve(model, z0, accept, ssn_params)
    except PrecisionFloor as exc:
        exc.candidate = last
        raise
    return core.SubsolveResult(
        certificate=res.payload, z=res.z, inner_iters=res.iters,
        cert_constructions=checks, unit_steps=res.unit_steps,
        final_unit_step=bool(res.steps) and res.steps[-1] == 1.0)


def make_subsolver(p, ssn_params=None, slack=0.0):
    """Bind a problem to the subsolver signature used by :func:`core.run`."""
    def subsolver(x_k, x_prev, xi_k, gamma_k, sigma, criterion, z_warm):
        return reg_subsolve(p, x_k, x_prev, xi_k, gamma_k, sigma, criterion,
                            z_warm, ssn_params, slack)
    return subsolver

