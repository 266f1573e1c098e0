"""Exception hierarchy shared by all modules."""


class PMETubeError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameterError(PMETubeError, ValueError):
    pass


class DegenerateExponentError(InvalidParameterError):
    """Raised when the diffusion exponent is not strictly greater than one."""


class InadmissibleDatumError(InvalidParameterError):
    pass


class RangeError(PMETubeError, ValueError):
    pass


class OracleFailureError(PMETubeError, RuntimeError):
    def __init__(self, message, bracket=None):
        super().__init__(message if bracket is None else f"{message} (bracket={bracket})")
        self.bracket = bracket


class ConvergenceError(PMETubeError, RuntimeError):
    def __init__(self, message, residual=None, history=None):
        super().__init__(message if residual is None else f"{message} (last residual={residual:.3e})")
        self.residual = residual
        self.history = history


class StabilityError(PMETubeError, RuntimeError):
    pass


class SchemeFailureError(PMETubeError, RuntimeError):
    pass


class TruncationGuardError(PMETubeError, RuntimeError):
    """The numerical support came too close to an artificial y-end."""


class WindowTooShortError(PMETubeError, RuntimeError):
    pass


class DegenerateProfileError(PMETubeError, ValueError):
    pass


class EstimationError(PMETubeError, ValueError):
    pass


class IntegrationFailureError(PMETubeError, RuntimeError):
    def __init__(self, message, tau=None):
        super().__init__(message if tau is None else f"{message} at tau={tau:.6g}")
        self.tau = tau


class WindowTooLateError(PMETubeError, ValueError):
    pass


class ArtifactIOError(PMETubeError, OSError):
    """Reading or writing an artifact failed."""
