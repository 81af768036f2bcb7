"""Semi-smooth Newton iteration for smooth convex dual problems.

The engine is generic: a :class:`DualModel` supplies the dual value, its
gradient and a generalized Hessian element, and the caller supplies an
acceptance predicate that decides when the current dual iterate is good
enough (in practice, when it yields a valid inexactness certificate for the
outer loop).
"""

from __future__ import annotations

import abc
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (CgNotConverged, LineSearchExhausted,
                     NotDescentDirection, PrecisionFloor, SubsolverStalled)

__all__ = [
    "SsnParams",
    "DualPoint",
    "DualModel",
    "NewtonOperator",
    "SsnResult",
    "newton_direction",
    "armijo_search",
    "ssn_solve",
    "pcg",
]

#: above this dual dimension the Newton system is solved by PCG
CHOLESKY_MAX_DIM = 4000
MAX_HALVINGS = 60
#: Newton steps at the noise floor without halving ||grad|| before giving up
FLOOR_PATIENCE = 5
#: relative size of the smallest dual-value change treated as meaningful
VALUE_RESOLUTION = 1e4 * np.finfo(float).eps


@dataclass
class SsnParams:
    mu_ls: float = 1e-4
    delta_ls: float = 0.5
    eta_bar: float = 1e-3
    gamma_exp: float = 0.2
    tau1: float = 0.99
    tau2: float = 1e-6
    max_inner: int = 100
    linear_solver: str = "auto"  # "auto", "cholesky" or "cg"

    def __post_init__(self):
        if not 0 < self.mu_ls < 0.5:
            raise ValueError("mu_ls must lie in (0, 1/2)")
        if not 0 < self.delta_ls < 1:
            raise ValueError("delta_ls must lie in (0, 1)")
        if not 0 < self.eta_bar < 1:
            raise ValueError("eta_bar must lie in (0, 1)")
        if not 0 < self.gamma_exp <= 1:
            raise ValueError("gamma_exp must lie in (0, 1]")
        if not (0 < self.tau1 < 1 and 0 < self.tau2 < 1):
            raise ValueError("tau1 and tau2 must lie in (0, 1)")
        if self.max_inner < 1:
            raise ValueError("max_inner must be positive")
        if self.linear_solver not in ("auto", "cholesky", "cg"):
            raise ValueError(f"unknown linear solver {self.linear_solver!r}")


class DualPoint:
    """A dual iterate with lazily evaluated value and gradient.

    Subclasses fill in ``_value`` / ``_grad`` hooks; application code hangs
    whatever intermediate quantities it needs (prox outputs, masks) on the
    instance so they are computed once per point.
    """

    def __init__(self, z):
        self.z = z
        self._value_cache = None
        self._grad_cache = None

    @property
    def value(self) -> float:
        if self._value_cache is None:
            self._value_cache = float(self._value())
        return self._value_cache

    @property
    def grad(self) -> np.ndarray:
        if self._grad_cache is None:
            self._grad_cache = self._grad()
        return self._grad_cache

    def _value(self):
        raise NotImplementedError

    def _grad(self):
        raise NotImplementedError


class DualModel(abc.ABC):
    """Interface consumed by :func:`ssn_solve`."""

    #: True when Hessian elements may be singular (adds ``eps_t * I``)
    needs_regularization = False
    #: gradient norm below which progress is indistinguishable from rounding
    noise_floor = 0.0

    @property
    @abc.abstractmethod
    def dim(self) -> int:
        ...

    @abc.abstractmethod
    def point(self, z) -> DualPoint:
        ...

    @abc.abstractmethod
    def jacobian(self, point) -> "NewtonOperator":
        ...

    def value(self, z):
        return self.point(np.asarray(z, dtype=float)).value

    def gradient(self, z):
        return self.point(np.asarray(z, dtype=float)).grad


class NewtonOperator:
    """``shift * I + scale * (A_J A_J^T + B)`` with ``B`` optional.

    ``A_J`` holds the active columns of the data matrix and ``B`` is an
    object with ``apply``/``dense``/``diagonal`` (a ball-projection Jacobian).
    """

    def __init__(self, AJ, scale, shift=0.0, extra=None, dim=None):
        self.AJ = AJ
        self.scale = float(scale)
        self.shift = float(shift)
        self.extra = extra
        self.m = AJ.shape[0] if dim is None else int(dim)

    def matvec(self, d):
        out = self.shift * d
        if self.AJ.shape[1]:
            out = out + self.scale * (self.AJ @ (self.AJ.T @ d))
        if self.extra is not None:
            out = out + self.scale * self.extra.apply(d)
        return out

    def dense(self):
        if self.AJ.shape[1]:
            H = self.AJ @ self.AJ.T
        else:
            H = np.zeros((self.m, self.m))
        if self.extra is not None:
            H = H + self.extra.dense()
        H *= self.scale
        H[np.diag_indices_from(H)] += self.shift
        return H

    def diagonal(self):
        diag = np.einsum("ij,ij->i", self.AJ, self.AJ) if self.AJ.shape[1] \
            else np.zeros(self.m)
        if self.extra is not None:
            diag = diag + self.extra.diagonal()
        return self.shift + self.scale * diag


def pcg(matvec, rhs, precond_diag, rtol, maxiter):
    """Jacobi-preconditioned conjugate gradient from ``x = 0``.

    Returns ``(x, converged)``; on failure ``x`` is the iterate with the
    smallest residual seen.
    """
    x = np.zeros_like(rhs)
    r = rhs.copy()
    target = rtol * np.linalg.norm(rhs)
    best, best_res = x.copy(), np.linalg.norm(r)
    if best_res <= target:
        return x, True
    inv = 1.0 / np.where(precond_diag > 0, precond_diag, 1.0)
    y = inv * r
    p = y.copy()
    ry = r @ y
    for _ in range(maxiter):
        Ap = matvec(p)
        pAp = p @ Ap
        if pAp <= 0:
            break
        alpha = ry / pAp
        x += alpha * p
        r -= alpha * Ap
        res = np.linalg.norm(r)
        if res < best_res:
            best, best_res = x.copy(), res
        if res <= target:
            return x, True
        y = inv * r
        ry_new = r @ y
        p = y + (ry_new / ry) * p
        ry = ry_new
    return best, False


def _regularization(params, gnorm):
    return params.tau1 * min(params.tau2, gnorm)


def _solve_newton_system(H, grad, eps, params):
    m = grad.size
    gnorm = np.linalg.norm(grad)
    solver = params.linear_solver
    if solver == "auto":
        solver = "cholesky" if m <= CHOLESKY_MAX_DIM else "cg"
    if solver == "cholesky":
        try:
            M = H.dense()
            if eps:
                M[np.diag_indices_from(M)] += eps
            c = scipy.linalg.cho_factor(M, lower=True, check_finite=False)
            return scipy.linalg.cho_solve(c, -grad, check_finite=False)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
            pass  # fall through to CG
    tol = min(params.eta_bar, gnorm ** (1.0 + params.gamma_exp))
    d, _ = pcg(lambda v: H.matvec(v) + eps * v, -grad,
               H.diagonal() + eps, tol / gnorm if gnorm else 0.0, m)
    # an unconverged PCG iterate is still a descent direction for SPD
    # systems; the line search decides whether it is usable
    if not np.all(np.isfinite(d)):
        raise CgNotConverged("CG produced a non-finite direction")
    return d


def newton_direction(model, z, grad, params, point=None):
    """Solve ``(H + eps_t I) d = -grad`` for one Newton step.

    ``eps_t = tau1 * min(tau2, ||grad||)`` when the model asks for
    regularization and 0 otherwise.
    """
    if point is None:
        point = model.point(np.asarray(z, dtype=float))
    H = model.jacobian(point)
    eps = _regularization(params, np.linalg.norm(grad)) \
        if model.needs_regularization else 0.0
    return _solve_newton_system(H, np.asarray(grad, dtype=float), eps, params)


def _armijo(model, point, d, params):
    slope = float(point.grad @ d)
    if not slope < 0:
        raise NotDescentDirection(f"<grad, d> = {slope} is not negative")
    # Once the predicted decrease is near the rounding resolution of the dual
    # value, value comparisons are noise.  The approximate Armijo condition
    # of Hager and Zhang, <grad Psi(z + a d), d> <= (2 mu - 1) * slope, is the
    # trapezoid-rule version of the same test and only involves gradients.
    flat = -params.mu_ls * slope <= VALUE_RESOLUTION * max(1.0, abs(point.value))
    alpha = 1.0
    for _ in range(MAX_HALVINGS + 1):
        trial = model.point(point.z + alpha * d)
        if flat:
            if float(trial.grad @ d) <= (2.0 * params.mu_ls - 1.0) * slope:
                return alpha, trial
        elif trial.value <= point.value + params.mu_ls * alpha * slope:
            return alpha, trial
        alpha *= params.delta_ls
    raise LineSearchExhausted(
        f"no Armijo step after {MAX_HALVINGS} reductions")


def armijo_search(model, z, d, params):
    """Backtracking step ``delta_ls ** i`` with the smallest admissible ``i``."""
    point = model.point(np.asarray(z, dtype=float))
    alpha, _ = _armijo(model, point, np.asarray(d, dtype=float), params)
    return alpha


@dataclass
class SsnResult:
    z: np.ndarray
    iters: int
    payload: object
    point: DualPoint
    steps: list = field(default_factory=list)

    @property
    def unit_steps(self):
        return sum(1 for a in self.steps if a == 1.0)


def ssn_solve(model, z0, accept, params):
    """Run SSN from ``z0`` until ``accept(point)`` returns a payload.

    ``accept`` is evaluated before every Newton step, including at ``z0``,
    so a warm start that is already good enough costs no Newton steps.

    Raises
    ------
    PrecisionFloor
        When ``||grad||`` is below ``model.noise_floor`` and has stopped
        improving, or the line search breaks down there.
    SubsolverStalled
        When ``params.max_inner`` Newton steps are taken without acceptance
        or the line search breaks down.
    """
    point = model.point(np.array(z0, dtype=float))
    steps = []
    best, idle = np.inf, 0
    for t in range(params.max_inner + 1):
        payload = accept(point)
        if payload is not None:
            return SsnResult(point.z, t, payload, point, steps)
        gnorm = float(np.linalg.norm(point.grad))
        at_floor = gnorm <= model.noise_floor
        if gnorm <= 0.5 * best:
            best, idle = gnorm, 0
        elif at_floor:
            idle += 1
        if at_floor and idle >= FLOOR_PATIENCE:
            raise PrecisionFloor(
                f"SSN stagnated at ||grad|| = {gnorm:.3e} after {t} iterations")
        if t == params.max_inner:
            break
        d = newton_direction(model, point.z, point.grad, params, point=point)
        try:
            alpha, point = _armijo(model, point, d, params)
        except (LineSearchExhausted, NotDescentDirection) as exc:
            cls = PrecisionFloor if at_floor else SubsolverStalled
            raise cls(
                f"SSN line search failed at inner iteration {t}: {exc}") from exc
        steps.append(alpha)
    cls = PrecisionFloor if np.linalg.norm(point.grad) <= model.noise_floor \
        else SubsolverStalled
    raise cls(
        f"SSN reached {params.max_inner} iterations without acceptance "
        f"(||grad|| = {np.linalg.norm(point.grad):.3e})")
