"""Exception hierarchy shared by all numerical modules."""


class DellError(Exception):
    """Base class for every error raised by this package."""


class DomainError(DellError, ValueError):
    """An argument lies outside the domain where the series converges."""


class ZeroArgument(DomainError):
    """A Laurent series was evaluated at the origin."""


class TruncationError(DellError):
    """The requested tail tolerance cannot be met within the truncation cap."""


class NearSingular(DellError, ZeroDivisionError):
    """A denominator is too close to a zero of a theta function."""


class VariantMismatch(DellError, ValueError):
    """Spectral parameter presence contradicts the chosen matrix family."""


class IllConditioned(DellError):
    """A linear solve exceeded the allowed condition estimate."""


class SeriesInversionError(DellError):
    """A truncated power series has a vanishing leading coefficient."""


class AliasingError(DellError):
    """Fourier extraction did not converge when the sample count was doubled."""


class DerivativeUnstable(DellError):
    """Richardson-refined finite differences disagree beyond tolerance."""


class GuardTripped(DellError):
    """A trajectory approached a singular configuration."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ConfigError(DellError, ValueError):
    """Invalid run configuration (CLI exit code 2)."""


class CheckFailure(DellError):
    """At least one verification check exceeded its tolerance (CLI exit code 1)."""
