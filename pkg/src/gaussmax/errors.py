"""Exception types raised across the package."""


class GaussMaxError(Exception):
    """Base class for all package errors."""


class ConfigError(GaussMaxError, ValueError):
    """Invalid parameters or configuration."""


class HorizonTooSmall(ConfigError):
    """log(T1*T2) does not exceed the dependence constant r, so rho >= 1."""


class OscillatingLimit(GaussMaxError):
    """A probed sequence did not settle in a single direction."""


class EmbeddingNotPSD(GaussMaxError):
    """Circulant embedding produced eigenvalues below the clamping tolerance."""

    def __init__(self, message, min_eigenvalue=None, sizes_tried=()):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue
        self.sizes_tried = tuple(sizes_tried)


class InvalidAlpha(ConfigError):
    """Regularity exponent outside (0, 2]."""


class BudgetExceeded(ConfigError):
    """Requested work exceeds the configured cap."""


class QuadratureNotConverged(GaussMaxError):
    """Gauss-Hermite node doubling did not reach the tolerance."""


class InvalidConstants(ConfigError):
    """Pickands-type constants are inconsistent with each other."""


class DomainError(ConfigError):
    """Argument outside the domain of a logarithm or root."""


class RegimeMismatch(ConfigError):
    """Grid spacing does not agree with the declared regime."""


class EmptySample(ConfigError):
    """A statistic was requested for an empty sample."""
