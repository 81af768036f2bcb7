"""Exception types shared across the package."""


class IBPDCAError(Exception):
    """Base class for solver errors."""


class SubsolverStalled(IBPDCAError):
    """The inner solver hit its iteration cap without certifying the criterion."""

    def __init__(self, message, report=None):
        super().__init__(message)
        #: partial ``SolveReport`` when raised from the outer loop
        self.report = report


class PrecisionFloor(SubsolverStalled):
    """The dual residual reached rounding level without certifying the criterion.

    ``candidate`` is the last uncertified primal point, when the subsolver
    knows one.
    """

    candidate = None


class NonFiniteObjective(IBPDCAError):
    pass


class CertificateRejected(IBPDCAError):
    """A certificate returned by a subsolver fails the independent recheck."""


class LineSearchExhausted(IBPDCAError):
    pass


class NotDescentDirection(IBPDCAError, ValueError):
    pass


class FactorizationFailed(IBPDCAError):
    pass


class CgNotConverged(IBPDCAError):
    pass


class RankDeficient(IBPDCAError):
    pass


class DegenerateBound(IBPDCAError):
    pass


class InfeasibleCertificate(IBPDCAError):
    pass


class NoConvergence(IBPDCAError):
    pass
