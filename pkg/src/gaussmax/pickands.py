"""Monte Carlo estimation of Pickands-type constants.

Two per-path functionals are available for every constant:

``window``
    exp(max over [0, lambda] of sqrt(2) B(t) - t^alpha) / lambda, the defining
    finite-window quantity.  Its expectation converges to the constant, but
    exp(max) has a 1/x tail, so at practical replication counts the sample mean
    sits far below the target.  It is kept because it is monotone in the index
    set, which makes it the right tool for coupled per-path comparisons.

``normalized``
    max_k e^{Z(k d)} / (d * sum_k e^{Z(k d)}) on the two-sided drifted path
    Z(t) = sqrt(2) B(t) - |t|^alpha, which is an unbiased, bounded-variance
    estimator of the discrete constant with spacing d.  The continuous constant
    is obtained from spacings dt and 4 dt by Richardson extrapolation with the
    known d^(alpha/2) discretization rate.  This is the default.

Two-sided paths come from one path on [0, lambda] re-centred at an interior
lattice point, B'(k) = B(c + k) - B(c), which is again fBm by stationarity of
increments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp
from scipy.stats import trim_mean

from .budget import check_reps, check_work, concat_chunks, run_chunks
from .errors import ConfigError
from .fieldsim import fbm_paths
from .model import check_alpha

METHODS = ("normalized", "window")
SQRT2 = math.sqrt(2.0)
RICHARDSON_RATIO = 4
TRIM = 0.1
# relative slack accepted when checking that a spacing is an integer multiple of dt
DIVIDES_TOL = 1e-9
DRIFT_SIGMAS = 3.0
DRIFT_RELATIVE = 0.05


@dataclass
class PickandsEstimate:
    value: float
    stderr: float
    window: float | tuple[float, float]
    dt: float | tuple[float, float]
    reps: int
    kind: str
    a: tuple[float, ...] | None = None
    x: float | None = None
    y: float | None = None
    method: str = "normalized"
    trimmed_mean: float = math.nan
    samples: np.ndarray | None = field(default=None, repr=False)

    @property
    def relative_stderr(self) -> float:
        return self.stderr / self.value if self.value > 0 else math.inf


@dataclass
class Extrapolation:
    value: float
    drift: float
    band: float
    converged: bool


def _summary(samples: np.ndarray) -> tuple[float, float, float]:
    n = samples.size
    mean = float(samples.mean())
    se = float(samples.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return mean, se, float(trim_mean(samples, TRIM))


def _steps(span: float, dt: float, name: str) -> int:
    k = span / dt
    if abs(k - round(k)) > DIVIDES_TOL * max(1.0, k) or round(k) < 1:
        raise ConfigError(f"{name} = {span} is not an integer multiple of dt = {dt}")
    return int(round(k))


def _check_method(method: str) -> None:
    if method not in METHODS:
        raise ConfigError(f"method must be one of {METHODS}, got {method!r}")


def _center(n: int, stride: int) -> int:
    return stride * ((n - 1) // (2 * stride))


def _drifted(paths: np.ndarray, alpha: float, dt: float, center: int) -> np.ndarray:
    t = (np.arange(paths.shape[1]) - center) * dt
    return SQRT2 * (paths - paths[:, center:center + 1]) - np.abs(t) ** alpha


@dataclass
class PathFunctionals:
    """Per-path logs of the pieces every estimator is assembled from.

    For each stride s: ``grid_max[s]`` is the log of the grid maximum of e^Z,
    ``fine_max[s]`` the log of the full-lattice maximum on the same re-centred
    path and ``grid_sum[s]`` the log of s*dt times the grid sum of e^Z (zero for
    the window method, which divides by lambda instead).
    """

    method: str
    alpha: float
    lam: float
    dt: float
    grid_max: dict[int, np.ndarray]
    fine_max: dict[int, np.ndarray]
    grid_sum: dict[int, np.ndarray]

    def values(self, stride: int) -> np.ndarray:
        if self.method == "window":
            return np.exp(self.grid_max[stride]) / self.lam
        return np.exp(self.grid_max[stride] - self.grid_sum[stride])


def path_functionals(alpha: float, lam: float, dt: float, reps: int, seed: int,
                     strides=(1,), method: str = "normalized", role: str = "fbm1",
                     threads: int = 1, work_cap: int | None = None) -> PathFunctionals:
    """Evaluate the per-path functionals for several grid strides on shared paths."""
    alpha = check_alpha(alpha)
    _check_method(method)
    reps = check_reps(reps)
    if not (lam > 0 and dt > 0):
        raise ConfigError(f"lambda and dt must be positive, got ({lam}, {dt})")
    steps = _steps(lam, dt, "lambda")
    n = steps + 1
    strides = tuple(sorted({int(s) for s in strides}))
    if strides[0] < 1 or strides[-1] > steps:
        raise ConfigError(f"grid strides must lie in [1, {steps}], got {strides}")
    check_work(float(reps) * n, work_cap, "Pickands estimate")

    def chunk(start, stop):
        paths = fbm_paths(alpha / 2.0, n, dt, seed, start, stop, role=role)
        out = []
        if method == "window":
            z = _drifted(paths, alpha, dt, 0)
            fine = z.max(axis=1)
            for s in strides:
                out += [z[:, ::s].max(axis=1), fine, np.zeros(stop - start)]
        else:
            for s in strides:
                z = _drifted(paths, alpha, dt, _center(n, s))
                sub = z[:, ::s]
                out += [sub.max(axis=1), z.max(axis=1), math.log(s * dt) + logsumexp(sub, axis=1)]
        return tuple(out)

    cols = concat_chunks(run_chunks(chunk, reps, threads))
    gm, fm, gs = {}, {}, {}
    for i, s in enumerate(strides):
        gm[s], fm[s], gs[s] = cols[3 * i], cols[3 * i + 1], cols[3 * i + 2]
    return PathFunctionals(method, alpha, float(lam), float(dt), gm, fm, gs)


def estimate_H_alpha(alpha: float, lam: float, dt: float, reps: int, seed: int, *,
                     method: str = "normalized", richardson: bool = True, role: str = "fbm1",
                     threads: int = 1, work_cap: int | None = None) -> PickandsEstimate:
    """Estimate the Pickands constant H_alpha.

    With the normalized method and ``richardson`` on, the per-path value is
    (q^b f_dt - f_{q dt}) / (q^b - 1) with q = 4 and b = alpha/2, which removes
    the leading lattice bias; the stderr is that of the combined per-path value.
    """
    if not (lam > 0 and dt > 0) or dt > lam / 16:
        raise ConfigError(f"need 0 < dt <= lambda/16, got dt={dt}, lambda={lam}")
    _check_method(method)
    use_rich = richardson and method == "normalized"
    strides = (1, RICHARDSON_RATIO) if use_rich else (1,)
    pf = path_functionals(alpha, lam, dt, reps, seed, strides, method, role, threads, work_cap)
    samples = pf.values(1)
    if use_rich:
        w = RICHARDSON_RATIO ** (pf.alpha / 2.0)
        samples = (w * samples - pf.values(RICHARDSON_RATIO)) / (w - 1.0)
    value, se, tm = _summary(samples)
    return PickandsEstimate(value, se, float(lam), float(dt), reps, "continuous",
                            method=method, trimmed_mean=tm, samples=samples)


def estimate_H_a_alpha(alpha: float, a: float, lam: float, reps: int, seed: int, *,
                       dt: float | None = None, method: str = "normalized", role: str = "fbm1",
                       threads: int = 1, work_cap: int | None = None) -> PickandsEstimate:
    """Estimate the discrete-grid constant H_{a,alpha} on the grid {k a}.

    The fBm is simulated with step ``dt`` (default a/8), which must divide a.
    """
    if not a > 0 or a > lam / 4:
        raise ConfigError(f"need 0 < a <= lambda/4, got a={a}, lambda={lam}")
    dt = a / 8.0 if dt is None else dt
    stride = _steps(a, dt, "a")
    pf = path_functionals(alpha, lam, dt, reps, seed, (stride,), method, role, threads, work_cap)
    samples = pf.values(stride)
    value, se, tm = _summary(samples)
    return PickandsEstimate(value, se, float(lam), float(dt), reps, "discrete", a=(float(a),),
                            method=method, trimmed_mean=tm, samples=samples)


@dataclass
class JointPaths:
    """Component functionals for the joint constant, reusable across (x, y).

    Every path of the first component is paired with every path of the second;
    because the drifted sheet is a sum of the two components, each pair is an
    exact draw of the sheet and the pooled mean is a two-sample U-statistic.
    """

    alphas: tuple[float, float]
    a: tuple[float, float]
    lam: tuple[float, float]
    dt: tuple[float, float]
    method: str
    # per component: log fine max, log grid max, log normalizer
    c1: tuple[np.ndarray, np.ndarray, np.ndarray]
    c2: tuple[np.ndarray, np.ndarray, np.ndarray]

    @property
    def reps(self) -> int:
        return self.c1[0].size

    def _norm(self) -> float:
        if self.method == "window":
            return math.log(self.lam[0] * self.lam[1])
        return 0.0

    def estimate(self, x: float, y: float) -> PickandsEstimate:
        f1, d1, s1 = self.c1
        f2, d2, s2 = self.c2
        norm = self._norm()
        # pair (i, j) contributes exp(min(A_i + B_j, C_i + D_j))
        A, C = f1 - s1 - x, d1 - s1 - y
        B, D = f2 - s2 - norm, d2 - s2 - norm
        rows = _pair_means(A, C, B, D)
        cols = _pair_means(B, D, A, C)
        value = float(rows.mean())
        n1, n2 = rows.size, cols.size
        var = rows.var(ddof=1) / n1 + cols.var(ddof=1) / n2 if min(n1, n2) > 1 else 0.0
        return PickandsEstimate(
            value, float(math.sqrt(var)), self.lam, self.dt, n1, "joint", a=self.a,
            x=float(x), y=float(y), method=self.method,
            trimmed_mean=float(trim_mean(rows, TRIM)), samples=rows,
        )


def _pair_means(A, C, B, D) -> np.ndarray:
    """m_i = mean_j exp(min(A_i + B_j, C_i + D_j)) for all i in O(n log n)."""
    # A_i + B_j <= C_i + D_j  iff  A_i - C_i <= D_j - B_j
    key = D - B
    order = np.argsort(key, kind="stable")
    key = key[order]
    eb = np.exp(B[order] - B.max())
    ed = np.exp(D[order] - D.max())
    # suffix sums of e^B over j with key_j >= u, prefix sums of e^D over key_j < u
    suffix_b = np.concatenate([np.cumsum(eb[::-1])[::-1], [0.0]])
    prefix_d = np.concatenate([[0.0], np.cumsum(ed)])
    k = np.searchsorted(key, A - C, side="left")
    total = np.exp(A + B.max()) * suffix_b[k] + np.exp(C + D.max()) * prefix_d[k]
    return total / key.size


def joint_constant_paths(alpha1, alpha2, a1, a2, lam1, lam2, dt1, dt2, reps, seed, *,
                         method: str = "normalized", threads: int = 1,
                         work_cap: int | None = None) -> JointPaths:
    """Simulate both fBm components once for repeated joint-constant evaluation."""
    comps = []
    for alpha, a, lam, dt, role in ((alpha1, a1, lam1, dt1, "fbm1"), (alpha2, a2, lam2, dt2, "fbm2")):
        if not a > 0 or a > lam / 4:
            raise ConfigError(f"need 0 < a <= lambda/4, got a={a}, lambda={lam}")
        s = _steps(a, dt, "a")
        pf = path_functionals(alpha, lam, dt, reps, seed, (s,), method, role, threads, work_cap)
        comps.append((pf.fine_max[s], pf.grid_max[s], pf.grid_sum[s]))
    return JointPaths(
        (check_alpha(alpha1), check_alpha(alpha2)), (float(a1), float(a2)),
        (float(lam1), float(lam2)), (float(dt1), float(dt2)), method, comps[0], comps[1],
    )


def estimate_joint_constant(alpha1, alpha2, a1, a2, x, y, lam1, lam2, dt1, dt2, reps, seed, *,
                            method: str = "normalized", threads: int = 1,
                            work_cap: int | None = None) -> PickandsEstimate:
    """Estimate the joint constant H^{x,y}_{a, alpha1, alpha2}.

    For fixed paths the inner integral over the level s is exp(min(M_c - x, M_d - y)),
    with M_c the fine-lattice and M_d the (a1, a2)-grid maximum of the drifted sheet
    sqrt(2)(B1 + B2) - t1^alpha1 - t2^alpha2.
    """
    paths = joint_constant_paths(alpha1, alpha2, a1, a2, lam1, lam2, dt1, dt2, reps, seed,
                                 method=method, threads=threads, work_cap=work_cap)
    return paths.estimate(x, y)


def extrapolate(estimates: list[PickandsEstimate]) -> Extrapolation:
    """Last-window value with a drift band; converged when the last step is in band.

    The band is 3 combined standard errors plus 5% of the value.
    """
    if len(estimates) < 3:
        raise ConfigError("extrapolation needs at least 3 windows")
    lams = [e.window if np.isscalar(e.window) else math.prod(e.window) for e in estimates]
    ratios = [b / a for a, b in zip(lams, lams[1:])]
    if any(r <= 1 for r in ratios) or max(ratios) - min(ratios) > 1e-9 * max(ratios):
        raise ConfigError(f"windows must increase geometrically, got {lams}")
    last, prev = estimates[-1], estimates[-2]
    drift = abs(last.value - prev.value)
    band = DRIFT_SIGMAS * math.hypot(last.stderr, prev.stderr) + DRIFT_RELATIVE * abs(last.value)
    return Extrapolation(last.value, drift, band, drift <= band)
