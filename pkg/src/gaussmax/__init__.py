"""Joint extremes of continuous-time and grid-sampled maxima of Gaussian random fields."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BudgetExceeded, ConfigError, DomainError, EmbeddingNotPSD, EmptySample, GaussMaxError,
    HorizonTooSmall, InvalidAlpha, InvalidConstants, OscillatingLimit, QuadratureNotConverged,
    RegimeMismatch,
)
from .model import CovarianceModel, GridSpec, Horizon, Regime, classify_grid, covariance, rho  # noqa: E402

__all__ = [
    "BudgetExceeded", "ConfigError", "CovarianceModel", "DomainError", "EmbeddingNotPSD",
    "EmptySample", "GaussMaxError", "GridSpec", "Horizon", "HorizonTooSmall", "InvalidAlpha",
    "InvalidConstants", "OscillatingLimit", "QuadratureNotConverged", "Regime", "RegimeMismatch",
    "classify_grid", "covariance", "rho",
]
