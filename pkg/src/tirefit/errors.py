"""Exception types shared across the package."""


class TirefitError(Exception):
    """Base class for all package errors."""


class NonPositiveLoad(TirefitError):
    """A computed vertical axle load was zero or negative."""


class SteeringOutOfRange(TirefitError):
    """Steering angle magnitude reached or exceeded pi/2."""


class LowSpeed(TirefitError):
    """Axle longitudinal speed below the slip-computation cutoff."""


class SeriesTooShort(TirefitError):
    """Signal shorter than the requested filter window."""


class NoOverlap(TirefitError):
    """Channel time windows share no common interval."""


class InsufficientCalibrationData(TirefitError):
    """Not enough low-dynamics driving to estimate sensor offsets."""


class InsufficientLinearData(TirefitError):
    """Not enough samples in the linear region for the shift pre-fit."""


class DegenerateSlope(TirefitError):
    """Linear-region slope too close to zero to place an x-intercept."""


class EmptyDataset(TirefitError):
    """Fitter invoked on a dataset with no samples."""


class NonFiniteObjective(TirefitError):
    """Optimization objective became NaN or infinite."""


class NotAPosterior(TirefitError):
    """Posterior samples requested from a point-estimate result."""


class SchemaError(TirefitError):
    """Input file violates the expected schema."""
