"""Exception hierarchy shared by every module of the package."""


class HJError(Exception):
    """Base class for all errors raised by hjdecay."""


class DomainError(HJError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class InvariantError(HJError, ValueError):
    """A structural invariant of a domain type does not hold."""


class CertificationError(HJError):
    """A sampled audit of the p-condition found a violating sample."""

    def __init__(self, message, r=None, eta=None, theta=None):
        super().__init__(message)
        self.r = r
        self.eta = eta
        self.theta = theta


class GeometryError(HJError, ValueError):
    """A ball or initial profile does not fit in the periodic box."""


class ShapeError(HJError, ValueError):
    """Two fields live on different boxes."""


class UnsupportedRegimeError(HJError, ValueError):
    """The requested operation is not defined for this exponent or variant."""


class StabilityError(HJError, FloatingPointError):
    """The explicit scheme produced non-finite values or broke the maximum principle."""

    def __init__(self, message, time=None, node=None):
        super().__init__(message)
        self.time = time
        self.node = node


class BudgetError(HJError, RuntimeError):
    """A solve exceeded its configured step ceiling."""


class InsufficientDataError(HJError, ValueError):
    """A trajectory does not contain the snapshots an audit needs."""


class DataError(HJError, ValueError):
    """Field values are inconsistent with what an audit assumes."""


class PreconditionError(HJError, ValueError):
    """Inputs to a harness violate its stated precondition."""


class ConfigError(HJError, ValueError):
    """An experiment configuration is malformed."""
