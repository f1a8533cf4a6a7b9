"""Covariance family, sampling-grid regimes and the dependence level rho(T)."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import ConfigError, HorizonTooSmall, InvalidAlpha, OscillatingLimit, RegimeMismatch

FAMILIES = ("SeparableExp",)
REGIMES = ("sparse", "pickands", "dense")

# covariance values below this are treated as exactly zero when sizing embeddings
NEGLIGIBLE_COVARIANCE = 1e-17

# classify_grid probe sequence and limit-detection threshold
PROBE_HORIZONS = tuple(10.0**k for k in range(2, 9))
RELATIVE_CHANGE_TOL = 1e-2

# finite-horizon consistency bands for D = p (2 log T1T2)^(1/alpha)
SPARSE_MIN_D = 2.0
DENSE_MAX_D = 0.5


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not (0.0 < alpha <= 2.0) or math.isnan(alpha):
        raise InvalidAlpha(f"alpha must lie in (0, 2], got {alpha}")
    return alpha


@dataclass(frozen=True)
class CovarianceModel:
    """Stationary correlation r(t) = exp(-(|t1|^alpha1 + |t2|^alpha2)).

    ``r`` is the long-range dependence constant; the stationary covariance itself
    is always weakly dependent, and r > 0 is realized by the mixture simulator.
    """

    alpha1: float
    alpha2: float
    r: float = 0.0
    family: str = "SeparableExp"

    def __post_init__(self):
        object.__setattr__(self, "alpha1", check_alpha(self.alpha1))
        object.__setattr__(self, "alpha2", check_alpha(self.alpha2))
        r = float(self.r)
        if not r >= 0.0 or not math.isfinite(r):
            raise ConfigError(f"dependence constant r must be finite and >= 0, got {self.r}")
        object.__setattr__(self, "r", r)
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown covariance family {self.family!r}; known: {FAMILIES}")

    @property
    def alphas(self) -> tuple[float, float]:
        return (self.alpha1, self.alpha2)

    def __call__(self, t1, t2):
        """Vectorized r(t1, t2)."""
        t1 = np.abs(np.asarray(t1, dtype=float))
        t2 = np.abs(np.asarray(t2, dtype=float))
        return np.exp(-(t1**self.alpha1 + t2**self.alpha2))

    def negligible_lag(self, axis: int) -> float:
        """Smallest lag along ``axis`` beyond which the covariance is below 1e-17."""
        alpha = self.alphas[axis]
        return (-math.log(NEGLIGIBLE_COVARIANCE)) ** (1.0 / alpha)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CovarianceModel":
        unknown = set(d) - {"alpha1", "alpha2", "r", "family"}
        if unknown:
            raise ConfigError(f"unknown covariance model keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def covariance(model: CovarianceModel, t) -> float:
    """r(t) for a single lag vector ``t = (t1, t2)``."""
    t1, t2 = t
    return float(model(t1, t2))


@dataclass(frozen=True)
class Horizon:
    T1: float
    T2: float

    def __post_init__(self):
        T1, T2 = float(self.T1), float(self.T2)
        if not (T1 > 0 and T2 > 0):
            raise ConfigError(f"horizon edges must be positive, got ({self.T1}, {self.T2})")
        if not T1 * T2 > 1.0:
            raise ConfigError(f"horizon needs T1*T2 > 1, got {T1 * T2}")
        object.__setattr__(self, "T1", T1)
        object.__setattr__(self, "T2", T2)

    @classmethod
    def square(cls, T: float) -> "Horizon":
        return cls(T, T)

    @property
    def log_area(self) -> float:
        return math.log(self.T1) + math.log(self.T2)

    @property
    def a_T(self) -> float:
        return math.sqrt(2.0 * self.log_area)


@dataclass(frozen=True)
class GridSpec:
    """Uniform sampling grid with spacings (p1, p2) and its declared regime.

    For the Pickands regime (a1, a2) are required and the spacings may be left
    unset; they are then derived from the horizon via ``spacings``.
    """

    p1: float | None
    p2: float | None
    regime: str = "sparse"
    a1: float | None = None
    a2: float | None = None

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ConfigError(f"regime must be one of {REGIMES}, got {self.regime!r}")
        if self.regime == "pickands":
            if self.a1 is None or self.a2 is None or not (self.a1 > 0 and self.a2 > 0):
                raise ConfigError("Pickands grid needs positive a1 and a2")
        elif self.p1 is None or self.p2 is None:
            raise ConfigError(f"{self.regime} grid needs spacings p1 and p2")
        for p in (self.p1, self.p2):
            if p is not None and not p > 0:
                raise ConfigError(f"grid spacings must be positive, got {p}")

    def spacings(self, model: CovarianceModel, h: Horizon) -> tuple[float, float]:
        if self.regime == "pickands" and (self.p1 is None or self.p2 is None):
            return (
                pickands_spacing(self.a1, model.alpha1, h),
                pickands_spacing(self.a2, model.alpha2, h),
            )
        return (float(self.p1), float(self.p2))

    def to_dict(self) -> dict:
        return {"p1": self.p1, "p2": self.p2, "regime": self.regime, "a1": self.a1, "a2": self.a2}

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        unknown = set(d) - {"p1", "p2", "regime", "a1", "a2"}
        if unknown:
            raise ConfigError(f"unknown grid keys: {sorted(unknown)}")
        return cls(
            p1=d.get("p1"), p2=d.get("p2"), regime=d.get("regime", "sparse"),
            a1=d.get("a1"), a2=d.get("a2"),
        )


class Regime(NamedTuple):
    kind: str
    a: tuple[float, float] | None = None


def pickands_spacing(a: float, alpha: float, h: Horizon) -> float:
    return a * (2.0 * h.log_area) ** (-1.0 / alpha)


def grid_scale(p: float, alpha: float, h: Horizon) -> float:
    """D = p (2 log T1T2)^(1/alpha), the grid spacing in Pickands units."""
    return p * (2.0 * h.log_area) ** (1.0 / alpha)


def classify_grid(p_rule: Callable[[Horizon], tuple[float, float]], model: CovarianceModel) -> Regime:
    """Classify a spacing rule by following D_i along T1 = T2 = 1e2, ..., 1e8.

    A coordinate whose last relative change is below 1e-2 is taken to have a
    finite positive limit; otherwise the direction of travel decides between
    sparse (growing) and dense (shrinking).
    """
    kinds, limits = [], []
    for i, alpha in enumerate(model.alphas):
        D = []
        for T in PROBE_HORIZONS:
            h = Horizon(T, T)
            D.append(grid_scale(p_rule(h)[i], alpha, h))
        D = np.asarray(D)
        if not np.all(np.isfinite(D)) or np.any(D < 0):
            raise OscillatingLimit(f"spacing rule gave invalid D values {D}")
        rel = np.diff(D) / np.where(D[:-1] > 0, D[:-1], 1.0)
        moving = rel[np.abs(rel) >= RELATIVE_CHANGE_TOL]
        if moving.size and not (np.all(moving > 0) or np.all(moving < 0)):
            raise OscillatingLimit(f"D_{i + 1} changes direction along the probe sequence: {D}")
        if D[-1] > 0 and abs(rel[-1]) < RELATIVE_CHANGE_TOL:
            kinds.append("pickands")
            limits.append(float(D[-1]))
        elif rel[-1] > 0:
            kinds.append("sparse")
            limits.append(math.inf)
        else:
            kinds.append("dense")
            limits.append(0.0)
    if kinds[0] != kinds[1]:
        raise RegimeMismatch(f"coordinates fall in different regimes: {kinds}")
    if kinds[0] == "pickands":
        return Regime("pickands", (limits[0], limits[1]))
    return Regime(kinds[0])


def check_regime(grid: GridSpec, model: CovarianceModel, h: Horizon) -> tuple[float, float]:
    """Return the spacings at ``h``, raising RegimeMismatch if they contradict the regime."""
    p = grid.spacings(model, h)
    D = [grid_scale(p[i], model.alphas[i], h) for i in range(2)]
    if grid.regime == "pickands":
        for Di, ai in zip(D, (grid.a1, grid.a2)):
            if abs(Di - ai) > 1e-9 * ai:
                raise RegimeMismatch(f"Pickands grid expects D = {ai}, spacing gives {Di}")
    elif grid.regime == "sparse" and min(D) < SPARSE_MIN_D:
        raise RegimeMismatch(f"sparse grid has D = {D} below {SPARSE_MIN_D} at this horizon")
    elif grid.regime == "dense" and max(D) > DENSE_MAX_D:
        raise RegimeMismatch(f"dense grid has D = {D} above {DENSE_MAX_D} at this horizon")
    return p


def rho(model: CovarianceModel, h: Horizon) -> float:
    """rho(T) = r / log(T1 T2), the variance share of the common mixture shift."""
    if model.r == 0.0:
        return 0.0
    if h.log_area <= model.r:
        raise HorizonTooSmall(
            f"log(T1*T2) = {h.log_area:.6g} does not exceed r = {model.r}; rho would be >= 1"
        )
    return model.r / h.log_area
