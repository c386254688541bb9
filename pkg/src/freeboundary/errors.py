"""Exception types shared across modules."""


class FreeBoundaryError(Exception):
    pass


class ResolutionExceeded(FreeBoundaryError):
    pass


class SingularJacobian(FreeBoundaryError):
    pass


class SolveFailure(FreeBoundaryError):
    pass


class ConditionViolation(FreeBoundaryError):
    pass


class SpanFailure(FreeBoundaryError):
    pass


class MissingTrajectory(FreeBoundaryError):
    pass


class CollarTooThin(FreeBoundaryError):
    pass


class NegativeEnergy(FreeBoundaryError):
    pass


class CflViolation(FreeBoundaryError):
    pass


class EnergyBlowup(FreeBoundaryError):
    pass


class NoContraction(FreeBoundaryError):
    pass


class IllConditionedMoments(FreeBoundaryError):
    pass


class InverseFailure(FreeBoundaryError):
    pass


class Diverged(FreeBoundaryError):
    pass


class LadderViolation(UserWarning):
    """An iterate left the geometric decay ladder of the Nash-Moser scheme by more than 10x."""
