"""Exception hierarchy shared by every mhdlab module."""


class MHDLabError(Exception):
    """Base class for all mhdlab errors."""


class ConfigurationError(MHDLabError, ValueError):
    """Invalid grid, solver or experiment parameters."""


class ShapeError(MHDLabError, ValueError):
    """Array shape does not match the grid."""


class NumericalBlowupError(MHDLabError, FloatingPointError):
    """Non-finite values appeared during integration."""

    def __init__(self, message, t=None, stage=None):
        super().__init__(message)
        self.t = t
        self.stage = stage


class TimeStepError(NumericalBlowupError):
    """The advective time-step restriction was violated."""


class PicardDivergenceError(MHDLabError, ArithmeticError):
    """Picard iterates grew beyond the divergence threshold."""


class BoxPolicyError(MHDLabError, ValueError):
    """Scaled data does not fit in its periodic box."""


class MissingSnapshotError(MHDLabError, LookupError):
    """A diagnostic needs stored snapshots that the run did not keep."""


class SnapshotFormatError(MHDLabError, ValueError):
    """A snapshot file is malformed."""
