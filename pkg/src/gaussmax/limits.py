"""Normalizing constants and the limiting joint laws of the two maxima.

All limit CDFs share the form E[exp(-g(x, y) e^{-r + sqrt(2r) Z})] over a
standard normal Z, evaluated by Gauss-Hermite quadrature with node doubling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import ndtr, roots_hermite

from .errors import DomainError, HorizonTooSmall, InvalidConstants, QuadratureNotConverged
from .model import REGIMES, CovarianceModel, GridSpec, Horizon

MIN_NODES = 16
MAX_NODES = 512
QUAD_TOL = 1e-10
BRACKET_TOL = 1e-12
CDF_COLUMNS = ("regime", "r", "x", "y", "value", "nodes_used")

CLOSED_FORM_H = {1.0: 1.0, 2.0: 1.0 / math.sqrt(math.pi)}


def known_pickands(alpha: float) -> float:
    """Closed-form Pickands constant for alpha in {1, 2}."""
    try:
        return CLOSED_FORM_H[float(alpha)]
    except KeyError:
        raise DomainError(f"no closed form for H_alpha at alpha={alpha}; supply an estimate") from None


def normal_tail(u):
    """Psi(u) = P(N(0,1) > u)."""
    return ndtr(-np.asarray(u, dtype=float))


@dataclass(frozen=True)
class NormalizingConstants:
    aT: float
    bT: float
    bTp: float
    baT: float
    regime: str = "sparse"

    @property
    def b_grid(self) -> float:
        """Centering of the grid maximum for the regime (dense shares b_T)."""
        return {"sparse": self.bTp, "pickands": self.baT, "dense": self.bT}[self.regime]


def _centering(aT: float, scale: float) -> float:
    """aT + log((2 pi)^(-1/2) scale) / aT."""
    if not scale > 0:
        raise DomainError(f"log argument must be positive, got {scale}")
    return aT + math.log(scale / math.sqrt(2 * math.pi)) / aT


CONVENTIONS = ("corrected", "literal")


def norm_constants(h: Horizon, model: CovarianceModel, grid: GridSpec | None = None,
                   H1: float | None = None, H2: float | None = None,
                   Ha1: float | None = None, Ha2: float | None = None,
                   convention: str = "corrected") -> NormalizingConstants:
    """a_T, b_T, b_T^p and b_{a,T}; missing inputs leave the dependent constant NaN.

    The centerings carry a polynomial factor L^(1/alpha1 + 1/alpha2 - 1/2) (and
    L^(-1/2) for b_T^p).  With ``convention="corrected"`` L = 2 log T1T2 = aT^2,
    which is what the tail asymptotic H1 H2 T1 T2 u^(2/alpha1+2/alpha2) Psi(u)
    requires for a Gumbel limit.  ``"literal"`` uses L = aT; the normalized
    maximum then drifts like log(aT) and has no limit.

    H1, H2 default to the closed forms when alpha is 1 or 2.
    """
    if convention not in CONVENTIONS:
        raise DomainError(f"convention must be one of {CONVENTIONS}, got {convention!r}")
    aT = h.a_T
    L = aT**2 if convention == "corrected" else aT
    H1 = known_pickands(model.alpha1) if H1 is None else H1
    H2 = known_pickands(model.alpha2) if H2 is None else H2
    if not (H1 > 0 and H2 > 0):
        raise DomainError("Pickands constants must be positive")
    power = 1 / model.alpha1 + 1 / model.alpha2 - 0.5
    bT = _centering(aT, H1 * H2 * L**power)
    bTp = baT = math.nan
    regime = "sparse"
    if grid is not None:
        regime = grid.regime
        p1, p2 = grid.spacings(model, h)
        bTp = _centering(aT, L**-0.5 / (p1 * p2))
    if Ha1 is not None or Ha2 is not None:
        if Ha1 is None or Ha2 is None or not (Ha1 > 0 and Ha2 > 0):
            raise DomainError("grid Pickands constants must both be positive")
        baT = _centering(aT, Ha1 * Ha2 * L**power)
    return NormalizingConstants(aT, bT, bTp, baT, regime)


def _level(r: float, nc: NormalizingConstants) -> float:
    if r < 0:
        raise DomainError(f"r must be >= 0, got {r}")
    level = 2.0 * r / nc.aT**2
    if level >= 1.0:
        raise HorizonTooSmall(f"rho = {level:.6g} >= 1 at aT = {nc.aT:.6g}")
    return level


def _b(nc: NormalizingConstants, which: str) -> float:
    if which == "continuous":
        return nc.bT
    if which == "grid":
        return nc.b_grid
    raise DomainError(f"which must be 'continuous' or 'grid', got {which!r}")


def u_star(x, r: float, z, nc: NormalizingConstants, which: str = "continuous"):
    """Level for the weak part that matches level b + x/aT for the mixture field."""
    level = _level(r, nc)
    return (_b(nc, which) + np.asarray(x) / nc.aT - math.sqrt(level) * np.asarray(z)) / math.sqrt(1 - level)


def u_star_first_order(x, r: float, z, nc: NormalizingConstants, which: str = "continuous"):
    """Expansion of ``u_star`` to order 1/aT: (x + r - sqrt(2r) z)/aT + b."""
    _level(r, nc)
    return (np.asarray(x) + r - math.sqrt(2 * r) * np.asarray(z)) / nc.aT + _b(nc, which)


# ----------------------------------------------------------------------------
# quadrature


@lru_cache(maxsize=None)
def _hermite(n: int) -> tuple[np.ndarray, np.ndarray]:
    u, w = roots_hermite(n)
    return math.sqrt(2.0) * u, w / math.sqrt(math.pi)


def normal_expectation(fn: Callable[[np.ndarray], np.ndarray]) -> tuple[float, int]:
    """E fn(Z) for Z ~ N(0,1), doubling nodes from 16 until successive values agree."""
    z, w = _hermite(MIN_NODES)
    prev = float(w @ fn(z))
    n = MIN_NODES
    while n < MAX_NODES:
        n *= 2
        z, w = _hermite(n)
        cur = float(w @ fn(z))
        if abs(cur - prev) <= QUAD_TOL:
            return cur, n
        prev = cur
    raise QuadratureNotConverged(f"Gauss-Hermite did not reach {QUAD_TOL} with {MAX_NODES} nodes")


def mixture_cdf(mass: float, r: float) -> tuple[float, int]:
    """E exp(-mass * e^{-r + sqrt(2r) Z}) and the node count used."""
    if r < 0:
        raise DomainError(f"r must be >= 0, got {r}")
    s = math.sqrt(2.0 * r)
    value, n = normal_expectation(lambda z: np.exp(-mass * np.exp(s * z - r)))
    return min(max(value, 0.0), 1.0), n


# ----------------------------------------------------------------------------
# limit laws


@dataclass(frozen=True)
class LimitQuery:
    """Evaluation point for a limit CDF.

    ``joint`` is the joint constant already evaluated at the shifted arguments
    (log(H1 H2) + x, log(Ha1 Ha2) + y); it is needed only for the Pickands regime.
    """

    x: float
    y: float = math.inf
    r: float = 0.0
    regime: str = "sparse"
    joint: float | None = None

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise DomainError(f"regime must be one of {REGIMES}, got {self.regime!r}")
        if self.r < 0 or math.isnan(self.r):
            raise DomainError(f"r must be >= 0, got {self.r}")


def _exp_neg(x: float) -> float:
    if x > 745.0:
        return 0.0
    return math.inf if x < -709.0 else math.exp(-x)


def sparse_mass(x: float, y: float) -> float:
    return _exp_neg(x) + _exp_neg(y)


def pickands_mass(x: float, y: float, joint: float) -> float:
    if joint is None or joint < 0 or math.isnan(joint):
        raise InvalidConstants(f"Pickands regime needs a joint constant >= 0, got {joint}")
    mass = _exp_neg(x) + _exp_neg(y) - joint
    if mass < -BRACKET_TOL:
        raise InvalidConstants(
            f"bracket e^-x + e^-y - H = {mass:.3e} is negative; the joint constant is inconsistent"
        )
    return max(mass, 0.0)


def limit_cdf_marginal_nodes(x: float, r: float = 0.0) -> tuple[float, int]:
    return mixture_cdf(_exp_neg(x), r)


def limit_cdf_marginal(x: float, r: float = 0.0) -> float:
    return limit_cdf_marginal_nodes(x, r)[0]


def evaluate_limit(q: LimitQuery) -> tuple[float, int]:
    """Limit CDF for the query's regime together with the quadrature node count."""
    if q.regime == "sparse":
        return mixture_cdf(sparse_mass(q.x, q.y), q.r)
    if q.regime == "pickands":
        return mixture_cdf(pickands_mass(q.x, q.y, q.joint), q.r)
    return limit_cdf_marginal_nodes(min(q.x, q.y), q.r)


def limit_cdf_sparse(q: LimitQuery) -> float:
    return mixture_cdf(sparse_mass(q.x, q.y), q.r)[0]


def limit_cdf_pickands(q: LimitQuery) -> float:
    return mixture_cdf(pickands_mass(q.x, q.y, q.joint), q.r)[0]


def limit_cdf_dense(q: LimitQuery) -> float:
    return limit_cdf_marginal(min(q.x, q.y), q.r)


# ----------------------------------------------------------------------------
# high-level tail predictions


def _check_box(box) -> tuple[float, float]:
    h1, h2 = (float(v) for v in box)
    if not (h1 > 0 and h2 > 0):
        raise DomainError(f"box sides must be positive, got {box}")
    return h1, h2


def tail_prediction_continuous(model: CovarianceModel, box, u: float,
                               H1: float | None = None, H2: float | None = None) -> float:
    """H1 H2 h1 h2 u^(2/alpha1 + 2/alpha2) Psi(u) for the maximum over the box."""
    if not u > 0:
        raise DomainError(f"u must be positive, got {u}")
    h1, h2 = _check_box(box)
    H1 = known_pickands(model.alpha1) if H1 is None else H1
    H2 = known_pickands(model.alpha2) if H2 is None else H2
    power = 2 / model.alpha1 + 2 / model.alpha2
    return float(H1 * H2 * h1 * h2 * u**power * normal_tail(u))


def tail_prediction_sparse_grid(grid: GridSpec, box, u: float, x: float | None = None,
                                H_product: float = 1.0) -> float:
    """S1 S2 / (p1 p2) Psi(u) for the grid maximum over the box.

    With ``x`` given, the joint form for exceeding u on the grid or u + x/u over
    the box: the same times (1 + e^-x H_product).
    """
    if grid.p1 is None or grid.p2 is None:
        raise DomainError("sparse tail prediction needs explicit spacings")
    S1, S2 = _check_box(box)
    base = S1 * S2 / (grid.p1 * grid.p2) * float(normal_tail(u))
    if x is None:
        return base
    return base * (1.0 + _exp_neg(x) * H_product)


def limit_cdf_marginal_array(xs, r: float = 0.0) -> np.ndarray:
    """Vectorized ``limit_cdf_marginal`` over many levels with one shared node count."""
    xs = np.asarray(xs, dtype=float)
    if r < 0:
        raise DomainError(f"r must be >= 0, got {r}")
    s = math.sqrt(2.0 * r)
    mass = np.exp(-xs)[..., None]

    def at(n):
        z, w = _hermite(n)
        return np.exp(-mass * np.exp(s * z - r)) @ w

    prev, n = at(MIN_NODES), MIN_NODES
    while n < MAX_NODES:
        n *= 2
        cur = at(n)
        if np.max(np.abs(cur - prev), initial=0.0) <= QUAD_TOL:
            return np.clip(cur, 0.0, 1.0)
        prev = cur
    raise QuadratureNotConverged(f"Gauss-Hermite did not reach {QUAD_TOL} with {MAX_NODES} nodes")
