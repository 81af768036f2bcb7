"""One-call solves with the standard initializers and reporting metrics."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import core, l12con, l12reg
from .baselines import PdcaeParams, fista_l1ls, pdcae_solve, power_method_lmax

__all__ = ["RunSpec", "RunResult", "solve", "METHODS", "PROBLEMS"]

METHODS = ("ibpdca-sc1", "ibpdca-sc2", "pdcae")
PROBLEMS = ("l12reg", "l12con")
DEFAULT_MAX_ITER = {"l12reg": 30000, "l12con": 20000}


@dataclass
class RunSpec:
    problem: str = "l12reg"
    method: str = "ibpdca-sc1"
    lam: float = 0.1
    mu: float = 0.95
    nf: float = 1.1
    kappa_c: float = 0.1
    sigma: Optional[float] = None
    max_iter: Optional[int] = None
    init_iters: int = 200

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ValueError(f"problem must be one of {PROBLEMS}")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.problem == "l12con" and self.method == "pdcae":
            raise ValueError("pdcae is only available for l12reg")
        if self.max_iter is None:
            self.max_iter = DEFAULT_MAX_ITER[self.problem]
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")

    @property
    def criterion(self):
        return {"ibpdca-sc1": core.SC1, "ibpdca-sc2": core.SC2}.get(self.method)


@dataclass
class RunResult:
    spec: RunSpec
    report: core.SolveReport
    t0: float
    feas: float
    rec: float
    problem_obj: object = field(repr=False, default=None)

    def summary(self):
        r = self.report
        return {
            "status": r.status,
            "objective": float(r.objective),
            "objective0": float(r.objective0),
            "feas": self.feas,
            "rec": self.rec,
            "outer_iter": r.outer_iters,
            "ssn_iter": r.inner_iters,
            "cert_constructions": r.cert_constructions,
            "time": r.wall_time,
            "t0": self.t0,
        }


def _build(inst, spec):
    if spec.problem == "l12reg":
        return l12reg.RegProblem(inst, spec.lam)
    return l12con.ConProblem(inst, mu=spec.mu, nf=spec.nf, kappa_c=spec.kappa_c)


def solve(inst, spec, callback=None):
    """Initialize, run the chosen method and compute the reported metrics.

    ``t0`` is the initializer time; ``report.wall_time`` covers the solver
    alone.  Subsolver stalls propagate to the caller.
    """
    p = _build(inst, spec)
    t = time.perf_counter()
    if spec.problem == "l12reg":
        x0 = fista_l1ls(inst.A, inst.b, spec.lam, spec.init_iters)
    else:
        x0 = l12con.initial_point(p, spec.init_iters)
    t0 = time.perf_counter() - t

    if spec.method == "pdcae":
        params = PdcaeParams(L_A=power_method_lmax(inst.A), max_iter=spec.max_iter)
        report = pdcae_solve(p, params, x0)
    else:
        params = core.SolverParams(criterion=spec.criterion, sigma=spec.sigma,
                                   max_outer=spec.max_iter)
        mod = l12reg if spec.problem == "l12reg" else l12con
        report = core.run(p, mod.make_subsolver(p), params, x0, callback=callback)

    x = report.x_final
    if spec.problem == "l12con":
        feas = float(np.linalg.norm(inst.A @ x - inst.b) - p.kappa)
    else:
        feas = 0.0
    rec = math.nan
    if inst.x_orig is not None:
        rec = float(np.linalg.norm(x - inst.x_orig) / (1 + np.linalg.norm(inst.x_orig)))
    return RunResult(spec, report, t0, feas, rec, p)
