"""Exception hierarchy shared by all modules."""


class VPSpecError(Exception):
    """Base class for every error raised by the library."""


class ValidationError(VPSpecError):
    """Invalid user input (profile, grid, configuration)."""


class NumericalError(VPSpecError):
    """A computation could not reach its requested accuracy."""


class DivergentMoment(ValidationError):
    pass


class InfiniteSupport(ValidationError):
    pass


class PoleOutsideDomain(ValidationError):
    pass


class OutOfRange(ValidationError):
    pass


class ContinuationUnavailable(NumericalError):
    pass


class NewtonDiverged(NumericalError):
    pass


class ContourTooCoarse(NumericalError):
    pass


class DegenerateRoot(NumericalError):
    pass


class QuadratureStall(NumericalError):
    pass


class WindowTooShort(ValidationError):
    pass
