"""Exception types shared across the package."""


class EyemarkError(Exception):
    """Base class for errors raised by this package."""


class PupilNotFoundError(EyemarkError):
    """No dark candidate survived the locator's filters."""


class FitError(EyemarkError):
    """Shape fitting failed (degenerate points, too few rays, no coverage)."""


class EmptyMaskError(EyemarkError):
    """An operation that needs a non-empty mask received an empty one."""


class OracleError(EyemarkError):
    """Base class for segmentation-oracle failures."""


class OracleTransportError(OracleError):
    """Retryable transport failure (connection refused, timeout, 5xx)."""


class OracleProtocolError(OracleError):
    """Fatal protocol violation (malformed payload, dimension mismatch)."""
