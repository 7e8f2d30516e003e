"""Exception types shared across the package."""


class CnlinesError(Exception):
    """Base class for all package-specific errors."""


class InvalidOrderError(CnlinesError):
    """Raised when a symmetry order is out of range for an operation."""


class DegenerateExponentError(CnlinesError):
    """Raised when a symmetry exponent makes an identity degenerate."""


class DegenerateGeometryError(CnlinesError):
    """Raised when two central planes are too close to parallel."""


class EstimationFailedError(CnlinesError):
    """Raised when no valid candidate pair exists for an image pair."""


class VotingFailedError(CnlinesError):
    """Raised when angle voting collects no valid votes."""


class ConvergenceError(CnlinesError):
    """Raised when an iterative solver fails to converge."""


class ConfigError(CnlinesError):
    """Raised for invalid pipeline configuration."""


class FormatError(CnlinesError):
    """Raised for malformed stack or rotation files."""
