"""Exception types raised by the simulator."""


class DipoleMediumError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(DipoleMediumError, ValueError):
    """Invalid or inconsistent simulation configuration."""


class PlacementError(DipoleMediumError):
    """Rejection sampling could not place all atoms within the attempt budget."""


class ZeroSeparationError(DipoleMediumError, ValueError):
    """Two dipoles coincide; the coupling kernel is undefined at r = 0."""


class SingularSystemError(DipoleMediumError, ArithmeticError):
    """The coupled-dipole matrix is numerically singular."""


class FitError(DipoleMediumError):
    """Not enough usable data to fit a wavenumber."""


class SpecMismatchError(DipoleMediumError, ValueError):
    """Profiles built with different binning specs were combined."""


class PolarizationMismatchError(DipoleMediumError, ValueError):
    """Amplitudes were solved for a different drive polarization."""


class PoleError(DipoleMediumError, ZeroDivisionError):
    """Lorentz-Lorenz inversion evaluated at the pole eps = -2."""


class ConvergenceError(DipoleMediumError):
    """A series failed its truncation test."""
