"""Outer loop of the inexact Bregman proximal DC algorithm.

The problem is ``min f(x) + P1(x) - P2(x)``.  Each outer iteration linearizes
``P2`` at the current point and hands the resulting Bregman proximal
subproblem to an application-specific subsolver.  The subsolver must return
an :class:`ErrorCertificate`: an approximate solution together with an error
pair ``(Delta, delta)`` that makes the optimality residual checkable.  The
loop rechecks every certificate against one of two relative criteria before
accepting it:

* ``SC1``: ``||Delta||^2 + |<Delta, x+ - x>| + delta <= sigma*gamma*D(x+, x)``
* ``SC2``: same left side, right side ``sigma*gamma*D(x, x_prev)``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (CertificateRejected, NonFiniteObjective, PrecisionFloor,
                     SubsolverStalled)

__all__ = [
    "GammaSchedule",
    "SolverParams",
    "ErrorCertificate",
    "SubsolveResult",
    "IterRecord",
    "SolveReport",
    "subgrad_p2_norm",
    "certificate_lhs",
    "check_criterion",
    "run",
    "invariant_violations",
    "TerminationRule",
]

SC1 = "SC1"
SC2 = "SC2"
CONVERGED_REL = "ConvergedRelChange"
CONVERGED_OBJ = "ConvergedObjChange"
MAX_ITER = "MaxIter"
#: stopped because the subproblem residual hit rounding level while the
#: termination test was already partly satisfied
PRECISION_FLOOR = "PrecisionFloor"


@dataclass(frozen=True)
class GammaSchedule:
    """Proximal parameters ``gamma_k = max(scale / sqrt(k + 1), floor)``.

    The default reproduces ``max(1/sqrt(k+1), 0.1)``.  ``gamma_min`` and
    ``gamma_max`` are the bounds the parameter checks rely on.
    """

    scale: float = 1.0
    floor: float = 0.1

    def __call__(self, k):
        return max(self.scale / math.sqrt(k + 1), self.floor)

    @property
    def gamma_min(self):
        return self.floor

    @property
    def gamma_max(self):
        return max(self.scale, self.floor)


@dataclass
class SolverParams:
    """Outer-loop parameters.

    ``sigma`` defaults to 0.9 for SC1 and 0.09 for SC2, the values that satisfy
    the convergence conditions with the default gamma schedule and ``L = 0``.
    """

    criterion: str = SC1
    sigma: Optional[float] = None
    gamma_schedule: Callable[[int], float] = field(default_factory=GammaSchedule)
    gamma_min: Optional[float] = None
    gamma_max: Optional[float] = None
    L: float = 0.0
    max_outer: int = 30000
    tol_x: float = 1e-7
    tol_f: float = 1e-10
    consecutive_required: int = 3
    strict: bool = False
    #: absolute allowance on the criterion; only useful with sigma = 0
    slack: float = 0.0

    def __post_init__(self):
        self.criterion = self.criterion.upper()
        if self.criterion not in (SC1, SC2):
            raise ValueError(f"criterion must be SC1 or SC2, got {self.criterion}")
        if self.sigma is None:
            self.sigma = 0.9 if self.criterion == SC1 else 0.09
        if self.gamma_min is None:
            self.gamma_min = getattr(self.gamma_schedule, "gamma_min", None)
        if self.gamma_max is None:
            self.gamma_max = getattr(self.gamma_schedule, "gamma_max", None)
        if self.gamma_min is None or self.gamma_max is None:
            raise ValueError("gamma_min and gamma_max are required for a "
                             "custom gamma schedule")
        if not self.L < self.gamma_min <= self.gamma_max:
            raise ValueError("need L < gamma_min <= gamma_max")
        bound = (self.gamma_min - self.L) / (
            self.gamma_min if self.criterion == SC1 else self.gamma_max)
        if not 0 <= self.sigma < bound:
            raise ValueError(
                f"sigma={self.sigma} outside [0, {bound:g}) for {self.criterion}")
        if self.max_outer < 1:
            raise ValueError("max_outer must be positive")
        if self.slack < 0:
            raise ValueError("slack must be nonnegative")


@dataclass
class ErrorCertificate:
    """Approximate subproblem solution with its error pair.

    ``lhs``/``rhs`` are the two sides of the relative criterion as evaluated
    by the subsolver; :func:`check_criterion` recomputes them independently.
    """

    x_next: np.ndarray
    delta_vec: np.ndarray
    delta_scalar: float
    lhs: float
    rhs: float
    gamma: float
    criterion: str
    parts: object = None


@dataclass
class SubsolveResult:
    certificate: ErrorCertificate
    z: np.ndarray
    inner_iters: int
    cert_constructions: int = 0
    unit_steps: int = 0
    final_unit_step: bool = False


@dataclass
class IterRecord:
    k: int
    objective: float
    objective_next: float
    D_fwd: float
    D_bwd: float
    sc_lhs: float
    sc_rhs: float
    inner_iters: int
    elapsed: float
    gamma: float
    criterion: str
    delta_norm: float
    delta_scalar: float
    stationarity: float
    cert_constructions: int = 0
    unit_steps: int = 0
    final_unit_step: bool = False
    #: constraint violation of the new iterate (0 for unconstrained problems)
    violation: float = 0.0


@dataclass
class SolveReport:
    status: str
    x_final: np.ndarray
    trajectory: list
    objective0: float
    wall_time: float
    criterion: str = SC1
    sigma: float = 0.0

    @property
    def outer_iters(self):
        return len(self.trajectory)

    @property
    def inner_iters(self):
        return sum(r.inner_iters for r in self.trajectory)

    @property
    def cert_constructions(self):
        return sum(r.cert_constructions for r in self.trajectory)

    @property
    def objective(self):
        if self.trajectory:
            return self.trajectory[-1].objective_next
        return self.objective0

    @property
    def unit_step_fraction(self):
        """Share of outer iterations whose last Newton step had unit length."""
        stepped = [r for r in self.trajectory if r.inner_iters > 0]
        if not stepped:
            return float("nan")
        return sum(r.final_unit_step for r in stepped) / len(stepped)


def subgrad_p2_norm(x, weight):
    """Subgradient of ``weight * ||x||``; the zero vector at the origin."""
    x = np.asarray(x, dtype=float)
    if weight < 0:
        raise ValueError("weight must be nonnegative")
    nrm = np.linalg.norm(x)
    if nrm == 0:
        return np.zeros_like(x)
    return (weight / nrm) * x


def certificate_lhs(delta_vec, delta_scalar, x_next, x_k):
    return (float(delta_vec @ delta_vec)
            + abs(float(delta_vec @ (x_next - x_k)))
            + float(delta_scalar))


def check_criterion(cert, kernel, params, x_k, x_prev=None):
    """Recheck a certificate from its stored fields.

    Uses ``cert.criterion`` (which records the SC1 bootstrap of an SC2 run)
    and ``cert.gamma``; returns True iff the inequality holds.  In strict
    mode ``||Delta|| <= sigma*gamma*D`` is also required.
    """
    if cert.delta_scalar < 0:
        return False
    if cert.criterion == SC1:
        D = kernel.distance(cert.x_next, x_k)
    else:
        if x_prev is None:
            raise ValueError("SC2 needs the previous iterate")
        D = kernel.distance(x_k, x_prev)
    rhs = params.sigma * cert.gamma * D
    lhs = certificate_lhs(cert.delta_vec, cert.delta_scalar, cert.x_next, x_k)
    ok = lhs <= rhs + params.slack
    if ok and params.strict:
        ok = np.linalg.norm(cert.delta_vec) <= rhs
    return bool(ok)


class TerminationRule:
    """Relative-change stopping test applied after every outer iteration.

    Stops when either ``max(rel dx, rel dF) < tol_x`` or ``rel dF < tol_f``
    holds for ``consecutive_required`` iterations in a row.
    """

    def __init__(self, tol_x=1e-7, tol_f=1e-10, consecutive_required=3):
        self.tol_x = tol_x
        self.tol_f = tol_f
        self.required = consecutive_required
        self.count = 0
        self.last_rel = []

    def _tests(self, x_new, x_old, F_new, F_old):
        rel_x = np.linalg.norm(x_new - x_old) / (1.0 + np.linalg.norm(x_new))
        rel_f = abs(F_new - F_old) / (1.0 + abs(F_new))
        return max(rel_x, rel_f) < self.tol_x, rel_f < self.tol_f

    def qualifies(self, x_new, x_old, F_new, F_old):
        """Whether the step would count as a hit, without recording it."""
        return any(self._tests(x_new, x_old, F_new, F_old))

    def update(self, x_new, x_old, F_new, F_old):
        rel_ok, obj_ok = self._tests(x_new, x_old, F_new, F_old)
        if rel_ok or obj_ok:
            self.count += 1
            self.last_rel.append(rel_ok)
        else:
            self.count = 0
            self.last_rel = []
        if self.count >= self.required:
            if all(self.last_rel[-self.required:]):
                return CONVERGED_REL
            return CONVERGED_OBJ
        return None


def run(problem, subsolver, params, x0, x_minus1=None, callback=None):
    """Run the outer loop from ``x0``.

    Parameters
    ----------
    problem : object
        Provides ``objective(x)``, ``p2_subgradient(x)`` and ``kernel``, and
        optionally ``violation(x)`` for constrained problems.
    subsolver : callable
        ``subsolver(x_k, x_prev, xi, gamma, sigma, criterion, z_warm)``
        returning a :class:`SubsolveResult`.  ``z_warm`` is None on the first
        call and the previous dual solution afterwards.
    params : SolverParams
    x0 : ndarray
    x_minus1 : ndarray, optional
        Reference point for SC2 at the first iteration.  When omitted, an
        SC2 run certifies its first iteration with SC1 instead.
    callback : callable, optional
        Called with each :class:`IterRecord`.

    Returns
    -------
    SolveReport

    Raises
    ------
    SubsolverStalled
        With the partial report attached as ``exc.report``.  A
        :class:`PrecisionFloor` stall ends the run with status
        ``PrecisionFloor`` instead once the run is converging.
    NonFiniteObjective
    CertificateRejected
        When a certificate fails the independent recheck.
    """
    kernel = problem.kernel
    violation = getattr(problem, "violation", None)
    x = np.array(x0, dtype=float)
    F = problem.objective(x)
    if not np.isfinite(F):
        raise NonFiniteObjective(f"F(x0) = {F}")
    F0 = F
    x_prev = x.copy() if x_minus1 is None else np.array(x_minus1, dtype=float)
    xi = problem.p2_subgradient(x)
    z = None
    trajectory = []
    rule = TerminationRule(params.tol_x, params.tol_f, params.consecutive_required)
    status = MAX_ITER
    t_start = time.perf_counter()

    for k in range(params.max_outer):
        gamma = params.gamma_schedule(k)
        criterion = params.criterion
        if criterion == SC2 and k == 0 and x_minus1 is None:
            criterion = SC1
        try:
            res = subsolver(x, x_prev, xi, gamma, params.sigma, criterion, z)
        except PrecisionFloor as exc:
            # stop quietly only if the run is already converging: either the
            # termination test has been hit, or the uncertified candidate
            # would hit it.  The last certified iterate is kept.
            cand = exc.candidate
            near = cand is not None and rule.qualifies(
                cand, x, problem.objective(cand), F)
            if rule.count == 0 and not near:
                exc.report = SolveReport("SubsolverStalled", x, trajectory, F0,
                                         time.perf_counter() - t_start,
                                         params.criterion, params.sigma)
                raise
            status = PRECISION_FLOOR
            break
        except SubsolverStalled as exc:
            exc.report = SolveReport("SubsolverStalled", x, trajectory, F0,
                                     time.perf_counter() - t_start,
                                     params.criterion, params.sigma)
            raise
        cert = res.certificate
        if not check_criterion(cert, kernel, params, x, x_prev):
            raise CertificateRejected(
                f"iteration {k}: certificate fails {cert.criterion} recheck "
                f"(lhs={cert.lhs:.3e}, rhs={cert.rhs:.3e})")
        x_new = np.asarray(cert.x_next, dtype=float)
        F_new = problem.objective(x_new)
        if not np.isfinite(F_new):
            raise NonFiniteObjective(f"F(x^{k + 1}) = {F_new}")
        xi_new = problem.p2_subgradient(x_new)
        stationarity = (np.linalg.norm(cert.delta_vec)
                        + gamma * np.linalg.norm(kernel.grad(x_new) - kernel.grad(x))
                        + np.linalg.norm(xi_new - xi))
        rec = IterRecord(
            k=k, objective=F, objective_next=F_new,
            D_fwd=kernel.distance(x_new, x), D_bwd=kernel.distance(x, x_new),
            sc_lhs=cert.lhs, sc_rhs=cert.rhs, inner_iters=res.inner_iters,
            elapsed=time.perf_counter() - t_start, gamma=gamma,
            criterion=criterion, delta_norm=float(np.linalg.norm(cert.delta_vec)),
            delta_scalar=float(cert.delta_scalar), stationarity=float(stationarity),
            cert_constructions=res.cert_constructions, unit_steps=res.unit_steps,
            final_unit_step=res.final_unit_step,
            violation=float(violation(x_new)) if violation else 0.0)
        trajectory.append(rec)
        if callback is not None:
            callback(rec)
        verdict = rule.update(x_new, x, F_new, F)
        x_prev, x, F, xi, z = x, x_new, F_new, xi_new, res.z
        if verdict is not None:
            status = verdict
            break

    return SolveReport(status, x, trajectory, F0, time.perf_counter() - t_start,
                       params.criterion, params.sigma)


def invariant_violations(report, params, tol=1e-9):
    """Check the descent properties every accepted trajectory must have.

    Returns a list of human-readable violations (empty when all hold):

    * SC1 steps: ``F(x+) <= F(x) - ((1-sigma)*gamma_k - L) * D(x+, x) + tol``
    * SC2 runs: ``F(x^k) + sigma*gamma_max*D(x^k, x^{k-1})`` non-increasing
    * SC1 runs: ``min_{i<k} D(x^{i+1}, x^i) <= (F(x0) - F(x^k)) /
      (((1-sigma)*gamma_min - L) * k)``; SC2 runs use the merit function
      and ``gamma_min - L - sigma*gamma_max`` instead.
    """
    out = []
    sigma, L = params.sigma, params.L
    traj = report.trajectory
    for r in traj:
        if r.criterion == SC1:
            bound = r.objective - ((1 - sigma) * r.gamma - L) * r.D_fwd + tol
            if r.objective_next > bound:
                out.append(f"k={r.k}: SC1 descent {r.objective_next!r} > {bound!r}")
    if params.criterion == SC2:
        merit = [report.objective0]
        for r in traj:
            merit.append(r.objective_next + sigma * params.gamma_max * r.D_fwd)
        for k in range(1, len(merit)):
            if merit[k] > merit[k - 1] + tol:
                out.append(f"k={k}: SC2 merit increased {merit[k - 1]!r} -> {merit[k]!r}")
        denom = params.gamma_min - L - sigma * params.gamma_max
    else:
        merit = [report.objective0] + [r.objective_next for r in traj]
        denom = (1 - sigma) * params.gamma_min - L
    running_min = math.inf
    for k in range(1, len(traj) + 1):
        running_min = min(running_min, traj[k - 1].D_fwd)
        bound = (merit[0] - merit[k]) / (denom * k)
        if running_min > bound + tol / k:
            out.append(f"k={k}: rate bound {running_min!r} > {bound!r}")
    return out
