"""Exception hierarchy shared by the whole package."""


class IrkSindyError(Exception):
    """Base class for every error raised by this package."""


# --- tableau construction -----------------------------------------------

class StageCountOutOfRange(IrkSindyError):
    """Requested stage count is outside the supported range."""


class OrderExceedsMethod(IrkSindyError):
    """Asked to verify order conditions beyond the method's order."""


# --- feature library ----------------------------------------------------

class EmptyLibrary(IrkSindyError):
    """Library specification produces no candidate terms."""


class DimensionMismatch(IrkSindyError):
    """Input vector or matrix has the wrong shape for this library/network."""


# --- dataset pipeline ---------------------------------------------------

class UnknownModel(IrkSindyError):
    """Benchmark model name not recognized."""


class InvalidParameter(IrkSindyError):
    """Model parameter override names an undeclared parameter."""


class IntegrationFailure(IrkSindyError):
    """Trajectory generation failed (stage solver broke down at the substep floor)."""

    def __init__(self, message, blowup_time=None):
        super().__init__(message)
        self.blowup_time = blowup_time


class WindowTooLarge(IrkSindyError):
    """Smoothing window is larger than the record or otherwise invalid."""


class NonUniformGrid(IrkSindyError):
    """Operation requires uniformly spaced sample times."""


class DegenerateCoordinate(IrkSindyError):
    """A state coordinate has zero variance and cannot be scaled."""


class UnsupportedScalingMode(IrkSindyError):
    """Coefficient rescaling is only defined for pure scaling transforms."""


class NonPolynomialLibrary(IrkSindyError):
    """Coefficient rescaling requires a purely polynomial library."""


class IoError(IrkSindyError):
    """File could not be read or written."""


class MalformedFile(IrkSindyError):
    """Trajectory file violates the expected format."""


# --- stage solving ------------------------------------------------------

class NonConvergence(IrkSindyError):
    """Stage iteration exhausted its budget or diverged."""

    def __init__(self, message, row=None, residual=None):
        super().__init__(message)
        self.row = row
        self.residual = residual


class SingularJacobian(IrkSindyError):
    """Newton linear system is singular."""


# --- differentiation / training -----------------------------------------

class NonFiniteValue(IrkSindyError):
    """A recorded computation produced NaN or infinity."""


class InvalidArchitecture(IrkSindyError):
    """Network layer sizes are inconsistent."""


class ShapeMismatch(IrkSindyError):
    """Parameter and gradient (or moment) shapes disagree."""


class EmptyDataset(IrkSindyError):
    """Loss requires at least one sample interval."""


class ConfigError(IrkSindyError):
    """Run configuration is missing keys, has unknown keys, or bad values."""
