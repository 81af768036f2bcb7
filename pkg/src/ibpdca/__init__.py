"""Inexact Bregman proximal DC algorithm with relative stopping criteria.

Quick start::

    from ibpdca import gen_instance, RunSpec, solve
    inst = gen_instance(200, 2000, 40, seed=0)
    result = solve(inst, RunSpec(problem="l12reg", method="ibpdca-sc1", lam=0.1))
    print(result.report.objective)
"""

from .core import ErrorCertificate, GammaSchedule, SolveReport, SolverParams, run
from .datagen import ProblemInstance, gen_instance
from .errors import (CertificateRejected, IBPDCAError, PrecisionFloor,
                     SubsolverStalled)
from .instance_io import load_csv_matrix, load_instance, save_instance
from .kernels import Quadratic, QuadraticPlusGram
from .l12con import ConProblem
from .l12reg import RegProblem
from .runner import RunSpec, solve
from .ssn import SsnParams

__version__ = "0.1.0"

__all__ = [
    "ErrorCertificate", "GammaSchedule", "SolveReport", "SolverParams", "run",
    "ProblemInstance", "gen_instance", "CertificateRejected", "IBPDCAError",
    "PrecisionFloor", "SubsolverStalled", "load_csv_matrix", "load_instance",
    "save_instance", "Quadratic", "QuadraticPlusGram", "ConProblem",
    "RegProblem", "RunSpec", "solve", "SsnParams",
]
