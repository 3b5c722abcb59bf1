"""Exception types raised across the package.

Every error derives from :class:`PairingError` so callers can catch the whole
family at once.  Errors that amount to a bad argument also derive from
``ValueError``.
"""


class PairingError(Exception):
    """Base class for all errors raised by :mod:`oddpairing`."""


# clifford
class EvenDimension(PairingError, ValueError):
    pass


class DimensionTooLarge(PairingError, ValueError):
    pass


# lattice
class DimensionMismatch(PairingError, ValueError):
    pass


class NotInvertible(PairingError):
    pass


class BallExceedsBox(PairingError, ValueError):
    pass


class BoxMismatch(PairingError, ValueError):
    pass


# models
class WrongDimension(PairingError, ValueError):
    pass


class GapClosing(PairingError, ValueError):
    pass


class PerturbationTooLarge(PairingError, ValueError):
    pass


class NotPeriodic(PairingError, ValueError):
    pass


class PhaseAmbiguous(PairingError):
    pass


class NotConverged(PairingError):
    pass


# localizer
class ZeroCommutator(PairingError):
    """[D, A] vanishes, so any kappa is admissible and kappa0 is undefined."""


class NotHermitian(PairingError, ValueError):
    pass


class GapClosed(PairingError):
    """The localizer is singular at working tolerance; its signature is undefined."""


class GapBoundViolated(PairingError):
    """A certified (kappa, rho) pair produced a gap below g/2.

    This can only happen when the norm data fed into the regime check is wrong.
    """


class FourierBoundViolated(PairingError):
    pass


class PreconditionViolated(PairingError, ValueError):
    pass


# inertia
class SingularAtTolerance(PairingError):
    """Raised when a matrix has eigenvalues inside the zero threshold.

    The partially computed :class:`~oddpairing.inertia.InertiaResult` is kept on
    ``self.result``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class OddSignature(PairingError):
    pass


class FactorizationUnreliable(PairingError):
    """The sparse symmetric factorization failed its accuracy certificate."""


# specflow
class EndpointSingular(PairingError):
    pass


class RefinementBudgetExceeded(PairingError):
    pass


class OddDifference(PairingError):
    pass


class Singular(PairingError):
    pass


class LinkFailed(PairingError):
    def __init__(self, link, message):
        super().__init__(f"link ({link}): {message}")
        self.link = link


# toeplitz oracle
class NotStabilized(PairingError):
    pass


class OracleDisagreement(PairingError):
    """Independent index computations returned different integers."""

    def __init__(self, message, reports=()):
        super().__init__(message)
        self.reports = list(reports)


# cli
class NotAnIndex(UserWarning):
    """kappa = 0 removes the Dirac term; the signature is then not an index."""
