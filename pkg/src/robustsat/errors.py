"""Exception hierarchy shared by all robustsat modules."""


class RobustSatError(Exception):
    """Base class for all errors raised by this package."""


class StructureMismatch(RobustSatError):
    """Matrix dimensions or uncertainty structures disagree."""


class IllPosed(RobustSatError):
    """An LFT is evaluated where I - M_d*Delta is singular or near-singular."""


class DegenerateInterval(RobustSatError):
    """An interval bound with lo >= hi."""


class MissingSqrtSet(RobustSatError):
    """Symmetric inertia modeling requested without a fitted (X, Y, Z) set."""


class MissingFit(MissingSqrtSet):
    """A separator for a symmetric uncertainty set needs the fitted matrices."""


class NonPsdVertex(RobustSatError):
    """An inertia vertex matrix is not positive definite."""


class RejectionStall(RobustSatError):
    """Rejection sampling failed to accept for too many consecutive draws."""


class TooManyVertices(RobustSatError):
    """Vertex enumeration requested for more scalar uncertainties than the guard allows."""


class UnsupportedBlock(RobustSatError):
    """An operation does not support this uncertainty block kind."""


class SingularMass(RobustSatError):
    """The nominal mass matrix of a descriptor model is too ill-conditioned to invert."""


class SolverFailure(RobustSatError):
    """The SDP backend failed or returned an unusable status."""


class Infeasible(RobustSatError):
    """An optimization problem was reported infeasible."""


class ValidationExhausted(RobustSatError):
    """Sequential design ran out of iterations without passing validation."""


class BlowUp(RobustSatError):
    """A nonlinear simulation diverged."""
