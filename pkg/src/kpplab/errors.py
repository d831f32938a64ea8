"""Exception hierarchy for kpplab."""


class KppLabError(Exception):
    """Base class for all kpplab errors."""


class InvalidKernelError(KppLabError):
    """Malformed kernel description (negative density, bad grid, wrong mass)."""


class DomainError(KppLabError):
    """Argument outside the mathematical domain of an operation."""


class NoFiniteTransformError(KppLabError):
    """The exponential transform is infinite for every positive argument."""


class BoundaryInfimumError(KppLabError):
    """The speed functional is minimized only at the finiteness boundary."""


class NoMinimizerError(KppLabError):
    """The speed functional has no interior minimizer (infimum at infinity)."""


class CapacityError(KppLabError):
    """Particle population exceeded the configured cap.

    Carries partial statistics so callers can report how far the run got.
    """

    def __init__(self, message, *, time=None, count=None):
        super().__init__(message)
        self.time = time
        self.count = count


class GridTooSmallError(KppLabError):
    """Kernel truncation radius exceeds the grid half-width."""


class StepSizeError(KppLabError):
    """Explicit time step violated its stability bound."""


class IterationLimitError(KppLabError):
    """Fixed-point iteration did not converge within the iteration budget."""

    def __init__(self, message, *, last_increment=None):
        super().__init__(message)
        self.last_increment = last_increment


class RangeOverflowError(KppLabError):
    """Requested evaluation would leave the floating-point range."""


class NoFrontError(KppLabError):
    """Field does not cross the requested level."""


class FitError(KppLabError):
    """Front fit is underdetermined (too few points or singular design)."""


class AlignmentError(KppLabError):
    """Profiles cannot be aligned (no overlapping value range)."""


class InsufficientHorizonError(KppLabError):
    """Martingale traces are shorter than the requested generation."""


class UnsupportedModelError(KppLabError):
    """Operation is not implemented for this model combination."""


class ConfigError(KppLabError):
    """Configuration document violates the schema.

    ``pointer`` is a JSON-pointer path to the offending element.
    """

    def __init__(self, pointer, message):
        super().__init__(f"{pointer}: {message}")
        self.pointer = pointer


class PlotFormatError(KppLabError):
    """CSV file does not match the column contract of the plot kind."""
