"""Exception types shared across the package."""


class PensError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(PensError):
    """Invalid configuration text or out-of-range parameter."""


class SymmetryError(PensError):
    """Conjugate-symmetry violation on inverse-transform input."""


class ZeroFrequencyError(PensError):
    """Singular Fourier multiplier applied to a field with a nonzero mean mode."""


class VacuumError(PensError):
    """Density lost strict positivity; the run cannot continue."""


class CflError(PensError):
    """Requested time step exceeds the advective stability limit."""


class ContractionError(PensError):
    """Fixed-point iteration left the contraction regime."""


class SnapshotError(PensError):
    """Malformed, truncated, or unsupported snapshot file."""


class ChannelError(PensError):
    """A required time-series channel is absent or unusable."""
