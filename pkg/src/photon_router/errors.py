"""Exception types shared across the package."""


class PhotonRouterError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(PhotonRouterError):
    """Invalid configuration, parameter file, or command-line input."""


class ResourceLimitError(PhotonRouterError):
    """A requested computation exceeds a configured resource cap."""


class SolverError(PhotonRouterError):
    """A linear solve or integrator failed (singular system, no convergence,
    step-size underflow)."""


class DegenerateFluxError(PhotonRouterError):
    """A correlation was requested on an output channel with (numerically)
    zero steady-state flux."""


class RecordFormatError(PhotonRouterError):
    """A click-record file is malformed or violates record invariants."""


class StatisticalInsufficiencyError(PhotonRouterError):
    """Too few click pairs to form a correlation estimate."""
