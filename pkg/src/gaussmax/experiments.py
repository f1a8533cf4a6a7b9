"""Monte Carlo harness comparing simulated maxima with the limit laws."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import limits
from .budget import check_reps, check_work, concat_chunks, run_chunks
from .errors import ConfigError, EmptySample
from .fieldsim import iter_fields, lattice_size, refined_max, shift_draws
from .model import CovarianceModel, GridSpec, Horizon, check_regime, rho
from .pickands import estimate_H_a_alpha, joint_constant_paths

MAX_PROXIES = ("lattice", "quadratic")
FINE_FACTOR = 8
MIN_HITS = 50
Z95 = 1.959963984540054
# window and replication count used when Pickands-grid constants must be estimated
PICKANDS_LAMBDA = 32.0
PICKANDS_REPS = 2000


def _horizons(value) -> list[Horizon]:
    if isinstance(value, Horizon):
        return [value]
    if isinstance(value, (int, float)):
        return [Horizon.square(value)]
    out = []
    for v in value:
        if isinstance(v, Horizon):
            out.append(v)
        elif isinstance(v, (int, float)):
            out.append(Horizon.square(v))
        else:
            out.append(Horizon(*v))
    if not out:
        raise ConfigError("at least one horizon is required")
    return out


@dataclass
class ExperimentConfig:
    model: CovarianceModel
    horizon: Horizon | list[Horizon]
    grid: GridSpec
    fine_dx: float
    fine_dy: float
    reps: int
    eval_points: list[tuple[float, float]] = field(default_factory=lambda: [(0.0, 0.0)])
    seed: int = 0
    work_cap: int | None = None
    max_proxy: str = "lattice"
    # Pickands constants; missing ones are closed forms (alpha in {1, 2}) or estimates
    constants: dict = field(default_factory=dict)

    KEYS = ("model", "horizon", "grid", "fine_dx", "fine_dy", "reps", "eval_points",
            "seed", "work_cap", "max_proxy", "constants")

    def __post_init__(self):
        self.horizon = _horizons(self.horizon)
        self.reps = check_reps(self.reps)
        if not (self.fine_dx > 0 and self.fine_dy > 0):
            raise ConfigError("fine lattice spacings must be positive")
        if self.max_proxy not in MAX_PROXIES:
            raise ConfigError(f"max_proxy must be one of {MAX_PROXIES}, got {self.max_proxy!r}")
        if self.max_proxy == "quadratic" and self.model.alphas != (2.0, 2.0):
            raise ConfigError("the quadratic max proxy needs a smooth field (alpha1 = alpha2 = 2)")
        self.eval_points = [(float(x), float(y)) for x, y in self.eval_points]
        unknown = set(self.constants) - {"H1", "H2", "Ha1", "Ha2", "joint"}
        if unknown:
            raise ConfigError(f"unknown constants: {sorted(unknown)}")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        unknown = set(d) - set(cls.KEYS)
        if unknown:
            raise ConfigError(f"unknown experiment keys: {sorted(unknown)}")
        missing = {"model", "horizon", "grid", "fine_dx", "reps"} - set(d)
        if missing:
            raise ConfigError(f"missing experiment keys: {sorted(missing)}")
        d = dict(d)
        d["model"] = CovarianceModel.from_dict(d["model"])
        d["grid"] = GridSpec.from_dict(d["grid"])
        d.setdefault("fine_dy", d["fine_dx"])
        if "eval_points" in d:
            d["eval_points"] = [tuple(p) for p in d["eval_points"]]
        return cls(**d)

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(), "horizon": [[h.T1, h.T2] for h in self.horizon],
            "grid": self.grid.to_dict(), "fine_dx": self.fine_dx, "fine_dy": self.fine_dy,
            "reps": self.reps, "eval_points": [list(p) for p in self.eval_points],
            "seed": self.seed, "work_cap": self.work_cap, "max_proxy": self.max_proxy,
            "constants": dict(self.constants),
        }


@dataclass
class JointRow:
    T1: float
    T2: float
    x: float
    y: float
    empirical_joint: float
    theoretical: float
    abs_err: float
    empirical_x: float
    empirical_y: float
    dependence: float
    dependence_se: float


@dataclass
class HorizonSummary:
    T1: float
    T2: float
    dx: float
    dy: float
    stride_x: int
    stride_y: int
    rho: float
    aT: float
    bT: float
    b_grid: float
    ks_marginal_continuous: float
    ks_marginal_grid: float
    ks_gumbel_continuous: float
    ks_gumbel_grid: float


@dataclass
class ExperimentResult:
    regime: str
    r: float
    label: str
    reps: int
    seed: int
    rows: list[JointRow]
    horizons: list[HorizonSummary]
    # normalized maxima per horizon, columns (continuous, grid)
    samples: list[np.ndarray] = field(default_factory=list, repr=False)

    def rows_for(self, h: Horizon) -> list[JointRow]:
        return [row for row in self.rows if (row.T1, row.T2) == (h.T1, h.T2)]

    def table(self) -> list[dict]:
        by_h = {(s.T1, s.T2): s for s in self.horizons}
        out = []
        for row in self.rows:
            s = by_h[(row.T1, row.T2)]
            out.append({**asdict(row), "ks_marginal_continuous": s.ks_marginal_continuous,
                        "ks_marginal_grid": s.ks_marginal_grid, "reps": self.reps,
                        "seed": self.seed})
        return out


def ks_statistic(samples, cdf) -> float:
    """Kolmogorov-Smirnov distance sup |F_n - F| evaluated at the sample points."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise EmptySample("KS statistic of an empty sample")
    try:
        F = np.broadcast_to(np.asarray(cdf(x), dtype=float), x.shape)
    except (TypeError, ValueError):
        F = np.array([float(cdf(v)) for v in x])
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def _fine_spacing(p: float, fine: float) -> tuple[float, int]:
    """Largest spacing <= fine that divides p, and the resulting stride."""
    if fine > p / FINE_FACTOR * (1 + 1e-12):
        raise ConfigError(f"fine spacing {fine} exceeds p/{FINE_FACTOR} = {p / FINE_FACTOR}")
    stride = int(math.ceil(p / fine - 1e-9))
    return p / stride, stride


def _pickands_constants(cfg: ExperimentConfig, threads: int) -> dict:
    """Fill Ha1/Ha2 by simulation when the grid regime needs them."""
    c = dict(cfg.constants)
    m, g = cfg.model, cfg.grid
    if g.regime == "pickands":
        for key, alpha, a, role in (("Ha1", m.alpha1, g.a1, "fbm1"), ("Ha2", m.alpha2, g.a2, "fbm2")):
            if key not in c:
                est = estimate_H_a_alpha(alpha, a, max(PICKANDS_LAMBDA, 4 * a), PICKANDS_REPS,
                                         cfg.seed, role=role, threads=threads)
                c[key] = est.value
    return c


def _joint_term(cfg: ExperimentConfig, c: dict, H1: float, H2: float, threads: int):
    if "joint" in c:
        return lambda x, y: c["joint"]
    g, m = cfg.grid, cfg.model
    lam = max(PICKANDS_LAMBDA, 4 * max(g.a1, g.a2))
    paths = joint_constant_paths(m.alpha1, m.alpha2, g.a1, g.a2, lam, lam, g.a1 / 8, g.a2 / 8,
                                 PICKANDS_REPS, cfg.seed, threads=threads)
    shift_c = math.log(H1 * H2)
    shift_d = math.log(c["Ha1"] * c["Ha2"])
    return lambda x, y: paths.estimate(shift_c + x, shift_d + y).value


def _maxima(cfg: ExperimentConfig, nx: int, ny: int, dx: float, dy: float,
            boxes: list[tuple[int, int, int, int]], threads: int) -> np.ndarray:
    """Raw (fine, grid) maxima per rep and box; boxes are (nx_k, ny_k, sx, sy) corners."""
    quad = cfg.max_proxy == "quadratic"

    def chunk(start, stop):
        out = np.empty((stop - start, len(boxes), 2))
        for first, fields in iter_fields(cfg.model, nx, ny, dx, dy, cfg.seed, start, stop):
            for i, f in enumerate(fields):
                for k, (bx, by, sx, sy) in enumerate(boxes):
                    sub = f[:bx, :by]
                    out[first - start + i, k, 0] = refined_max(sub, dx, dy) if quad else sub.max()
                    out[first - start + i, k, 1] = sub[::sx, ::sy].max()
        return out

    return concat_chunks(run_chunks(chunk, cfg.reps, threads))


def run_joint_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    """Empirical joint CDF of the normalized (continuous, grid) maxima vs the limit law.

    Horizons sharing one fine lattice (fixed grid spacings) are evaluated as
    nested corner boxes of a single field realization per replication.
    """
    m, g = cfg.model, cfg.grid
    const = _pickands_constants(cfg, threads)
    H1 = const.get("H1", limits.known_pickands(m.alpha1) if m.alpha1 in (1.0, 2.0) else None)
    H2 = const.get("H2", limits.known_pickands(m.alpha2) if m.alpha2 in (1.0, 2.0) else None)
    if H1 is None or H2 is None:
        raise ConfigError("constants H1 and H2 must be supplied for alpha outside {1, 2}")

    plans = []
    for h in cfg.horizon:
        p1, p2 = check_regime(g, m, h)
        dx, sx = _fine_spacing(p1, cfg.fine_dx)
        dy, sy = _fine_spacing(p2, cfg.fine_dy)
        plans.append((h, dx, dy, sx, sy, lattice_size(h.T1, dx), lattice_size(h.T2, dy)))

    groups: dict[tuple[float, float], list] = {}
    for plan in plans:
        groups.setdefault((plan[1], plan[2]), []).append(plan)
    work = sum(max(p[5] for p in grp) * max(p[6] for p in grp) for grp in groups.values())
    check_work(float(work) * cfg.reps, cfg.work_cap, "joint experiment")

    raw = {}
    for (dx, dy), grp in groups.items():
        nx, ny = max(p[5] for p in grp), max(p[6] for p in grp)
        boxes = [(p[5], p[6], p[3], p[4]) for p in grp]
        res = _maxima(cfg, nx, ny, dx, dy, boxes, threads)
        for k, p in enumerate(grp):
            raw[p[0]] = res[:, k, :]

    joint = _joint_term(cfg, const, H1, H2, threads) if g.regime == "pickands" else None
    shifts = shift_draws(cfg.seed, 0, cfg.reps) if m.r > 0 else None
    rows, summaries, samples = [], [], []
    for h, dx, dy, sx, sy, _, _ in plans:
        level = rho(m, h)
        M = raw[h]
        if level > 0:
            M = math.sqrt(1 - level) * M + math.sqrt(level) * shifts[:, None]
        nc = limits.norm_constants(h, m, g, H1, H2, const.get("Ha1"), const.get("Ha2"))
        Xc = nc.aT * (M[:, 0] - nc.bT)
        Xg = nc.aT * (M[:, 1] - nc.b_grid)
        samples.append(np.column_stack([Xc, Xg]))
        for x, y in cfg.eval_points:
            A, B = Xc <= x, Xg <= y
            pj, pa, pb = float(np.mean(A & B)), float(np.mean(A)), float(np.mean(B))
            q = limits.LimitQuery(x, y, m.r, g.regime, joint(x, y) if joint else None)
            theo = limits.evaluate_limit(q)[0]
            prod = pa * pb
            rows.append(JointRow(h.T1, h.T2, x, y, pj, theo, abs(pj - theo), pa, pb,
                                 abs(pj - prod), math.sqrt(prod * (1 - prod) / cfg.reps)))
        summaries.append(HorizonSummary(
            h.T1, h.T2, dx, dy, sx, sy, level, nc.aT, nc.bT, nc.b_grid,
            ks_statistic(Xc, lambda v: limits.limit_cdf_marginal_array(v, m.r)),
            ks_statistic(Xg, lambda v: limits.limit_cdf_marginal_array(v, m.r)),
            ks_statistic(Xc, lambda v: limits.limit_cdf_marginal_array(v, 0.0)),
            ks_statistic(Xg, lambda v: limits.limit_cdf_marginal_array(v, 0.0)),
        ))
    label = "mixture-model verification" if m.r > 0 else "stationary field"
    return ExperimentResult(g.regime, m.r, label, cfg.reps, cfg.seed, rows, summaries, samples)


# ----------------------------------------------------------------------------
# tail probabilities


@dataclass
class TailRow:
    u: float
    empirical_p: float
    predicted_p: float
    ratio: float
    ratio_low: float
    ratio_high: float
    hits: int
    too_few_hits: bool
    grid_empirical_p: float = math.nan
    grid_predicted_p: float = math.nan
    grid_ratio: float = math.nan


def _binomial_ci(hits: int, n: int) -> tuple[float, float]:
    """Wilson 95% interval for a binomial proportion."""
    p = hits / n
    denom = 1 + Z95**2 / n
    centre = (p + Z95**2 / (2 * n)) / denom
    half = Z95 * math.sqrt(p * (1 - p) / n + Z95**2 / (4 * n * n)) / denom
    return max(centre - half, 0.0), min(centre + half, 1.0)


def box_maxima(model: CovarianceModel, box, fine_dx: float, fine_dy: float, reps: int, seed: int,
               strides: tuple[int, int] | None = None, max_proxy: str = "lattice",
               threads: int = 1, work_cap: int | None = None) -> np.ndarray:
    """(reps, 2) array of (fine max, strided grid max) over [0, h1] x [0, h2]."""
    reps = check_reps(reps)
    h1, h2 = (float(v) for v in box)
    if not (h1 > 0 and h2 > 0 and fine_dx > 0 and fine_dy > 0):
        raise ConfigError("box sides and spacings must be positive")
    if max_proxy not in MAX_PROXIES:
        raise ConfigError(f"max_proxy must be one of {MAX_PROXIES}, got {max_proxy!r}")
    if max_proxy == "quadratic" and model.alphas != (2.0, 2.0):
        raise ConfigError("the quadratic max proxy needs a smooth field (alpha1 = alpha2 = 2)")
    nx, ny = lattice_size(h1, fine_dx), lattice_size(h2, fine_dy)
    check_work(float(nx * ny) * reps, work_cap, "box maxima")
    sx, sy = strides or (1, 1)
    quad = max_proxy == "quadratic"

    def chunk(start, stop):
        out = np.empty((stop - start, 2))
        for first, fields in iter_fields(model, nx, ny, fine_dx, fine_dy, seed, start, stop):
            for i, f in enumerate(fields):
                out[first - start + i, 0] = refined_max(f, fine_dx, fine_dy) if quad else f.max()
                out[first - start + i, 1] = f[::sx, ::sy].max()
        return out

    return concat_chunks(run_chunks(chunk, reps, threads))


def tail_ratio_check(model: CovarianceModel, box, u_list, fine_dx: float, fine_dy: float,
                     reps: int, seed: int, *, grid: GridSpec | None = None,
                     H1: float | None = None, H2: float | None = None,
                     max_proxy: str = "lattice", threads: int = 1,
                     work_cap: int | None = None) -> list[TailRow]:
    """Empirical P(max over box > u) against the continuous tail asymptotic.

    With a sparse ``grid`` the strided lattice maximum is also compared with the
    grid tail prediction.  Rows with fewer than 50 exceedances are flagged.
    """
    strides = None
    if grid is not None:
        _, sx = _fine_spacing(grid.p1, fine_dx)
        _, sy = _fine_spacing(grid.p2, fine_dy)
        if not (math.isclose(grid.p1 / sx, fine_dx) and math.isclose(grid.p2 / sy, fine_dy)):
            raise ConfigError("grid spacings must be integer multiples of the fine spacings")
        strides = (sx, sy)
    M = box_maxima(model, box, fine_dx, fine_dy, reps, seed, strides, max_proxy, threads, work_cap)
    rows = []
    for u in u_list:
        hits = int(np.sum(M[:, 0] > u))
        emp = hits / reps
        pred = limits.tail_prediction_continuous(model, box, u, H1, H2)
        lo, hi = _binomial_ci(hits, reps)
        row = TailRow(float(u), emp, pred, emp / pred, lo / pred, hi / pred, hits, hits < MIN_HITS)
        if grid is not None:
            row.grid_empirical_p = float(np.mean(M[:, 1] > u))
            row.grid_predicted_p = limits.tail_prediction_sparse_grid(grid, box, u)
            row.grid_ratio = row.grid_empirical_p / row.grid_predicted_p
        rows.append(row)
    return rows


# ----------------------------------------------------------------------------
# dense grids


@dataclass
class DenseRow:
    a: float
    diff: float
    stderr: float
    stride: int


@dataclass
class DenseStudy:
    rows: list[DenseRow]
    monotone: bool
    u: float
    reps: int
    seed: int


def dense_difference_study(model: CovarianceModel, box, u: float, a_list, fine_dx: float,
                           reps: int, seed: int, *, threads: int = 1,
                           work_cap: int | None = None) -> DenseStudy:
    """P(grid max <= u) - P(fine max <= u) on coupled samples for each grid spacing a.

    ``monotone`` reports whether the differences are non-increasing along the
    given order of a (typically halving) up to 2 binomial standard errors.
    """
    strides = []
    for a in a_list:
        k = a / fine_dx
        if abs(k - round(k)) > 1e-9 * max(1.0, k) or round(k) < 1:
            raise ConfigError(f"grid spacing {a} is not a multiple of fine_dx = {fine_dx}")
        strides.append(int(round(k)))
    reps = check_reps(reps)
    h1, h2 = (float(v) for v in box)
    nx, ny = lattice_size(h1, fine_dx), lattice_size(h2, fine_dx)
    check_work(float(nx * ny) * reps, work_cap, "dense study")

    def chunk(start, stop):
        out = np.empty((stop - start, len(strides) + 1))
        for first, fields in iter_fields(model, nx, ny, fine_dx, fine_dx, seed, start, stop):
            for i, f in enumerate(fields):
                out[first - start + i, 0] = f.max()
                for k, s in enumerate(strides):
                    out[first - start + i, k + 1] = f[::s, ::s].max()
        return out

    M = concat_chunks(run_chunks(chunk, reps, threads))
    fine_ok = M[:, 0] <= u
    rows = []
    for k, (a, s) in enumerate(zip(a_list, strides)):
        d = (M[:, k + 1] <= u) & ~fine_ok
        p = float(np.mean(d))
        rows.append(DenseRow(float(a), p, math.sqrt(p * (1 - p) / reps), s))
    monotone = all(
        nxt.diff <= cur.diff + 2 * math.hypot(cur.stderr, nxt.stderr)
        for cur, nxt in zip(rows, rows[1:])
    )
    return DenseStudy(rows, monotone, float(u), reps, seed)
