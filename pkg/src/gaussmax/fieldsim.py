"""Exact lattice sampling of fBm, stationary 2D fields and the mixture field.

Both samplers are circulant embeddings: the covariance is written into a
circulant (block-circulant in 2D) matrix whose eigenvalues come from one FFT,
and a complex Gaussian vector scaled by their square roots is transformed back.
The real and imaginary parts of one transform are two independent samples, so
replications are produced in pairs; replication ``i`` always lives in the pair
``i // 2`` and draws from the stream keyed by ``(seed, role, i // 2)``.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator

import numpy as np
import scipy.fft as sfft

from .errors import BudgetExceeded, ConfigError, EmbeddingNotPSD
from .model import CovarianceModel, Horizon, rho
from .rng import stream

EIGEN_TOL = 1e-10
MAX_DOUBLINGS = 2
DEFAULT_MAX_POINTS = 50_000_000
# complex entries per FFT batch
BATCH_ENTRIES = 1 << 21

GFLD_MAGIC = b"GFLD"
GFLD_HEADER = struct.Struct("<4sIIIdd")


@dataclass
class FieldSample:
    values: np.ndarray = field(repr=False)
    dx: float
    dy: float
    nx: int
    ny: int
    seed: int
    common_shift: float = 0.0

    def to_bytes(self) -> bytes:
        header = GFLD_HEADER.pack(GFLD_MAGIC, self.nx, self.ny, 0, self.dx, self.dy)
        return header + np.ascontiguousarray(self.values, dtype="<f8").tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes, seed: int = 0) -> "FieldSample":
        magic, nx, ny, _, dx, dy = GFLD_HEADER.unpack_from(blob)
        if magic != GFLD_MAGIC:
            raise ConfigError("not a GFLD field dump")
        values = np.frombuffer(blob, dtype="<f8", offset=GFLD_HEADER.size).reshape(nx, ny)
        return cls(values.astype(float), dx, dy, nx, ny, seed)


@dataclass
class FbmPath:
    values: np.ndarray = field(repr=False)
    hurst: float
    dt: float
    n: int
    seed: int


def lattice_size(T: float, d: float) -> int:
    """Number of lattice points covering [0, T] with spacing d."""
    return int(math.ceil(T / d - 1e-9)) + 1


# ----------------------------------------------------------------------------
# fractional Brownian motion


@lru_cache(maxsize=32)
def _fgn_sqrt_eigenvalues(hurst: float, N: int) -> np.ndarray:
    k = np.arange(N + 1, dtype=float)
    two_h = 2.0 * hurst
    acf = 0.5 * (np.abs(k + 1) ** two_h + np.abs(k - 1) ** two_h - 2.0 * k**two_h)
    row = np.concatenate([acf, acf[-2:0:-1]])
    lam = sfft.fft(row).real
    tol = EIGEN_TOL * lam.max()
    if lam.min() < -tol:
        raise EmbeddingNotPSD(
            f"fGn embedding has eigenvalue {lam.min():.3e} (H={hurst}, N={N})",
            min_eigenvalue=float(lam.min()), sizes_tried=(2 * N,),
        )
    sq = np.sqrt(np.clip(lam, 0.0, None) / (2 * N))
    sq.setflags(write=False)
    return sq


def _check_fbm_args(hurst, n, dt):
    if not (0.0 < hurst <= 1.0):
        raise ConfigError(f"hurst must lie in (0, 1], got {hurst}")
    if int(n) != n or n < 2:
        raise ConfigError(f"fBm needs n >= 2 points, got {n}")
    if not dt > 0:
        raise ConfigError(f"dt must be positive, got {dt}")


def fbm_paths(hurst: float, n: int, dt: float, seed: int, start: int, stop: int,
              role: str = "fbm1") -> np.ndarray:
    """fBm paths for replications ``start..stop-1`` as an array (stop-start, n)."""
    _check_fbm_args(hurst, n, dt)
    N = n - 1
    sq = _fgn_sqrt_eigenvalues(float(hurst), N)
    out = np.empty((stop - start, n))
    out[:, 0] = 0.0
    scale = dt**hurst
    pairs = range(start // 2, (stop + 1) // 2)
    per_batch = max(1, BATCH_ENTRIES // (2 * N))
    pairs = list(pairs)
    for b0 in range(0, len(pairs), per_batch):
        chunk = pairs[b0:b0 + per_batch]
        w = np.empty((len(chunk), 2 * N), dtype=complex)
        for row, p in enumerate(chunk):
            g = stream(seed, role, p).standard_normal((2, 2 * N))
            w[row].real = g[0]
            w[row].imag = g[1]
        f = sfft.fft(w * sq, axis=1)
        for row, p in enumerate(chunk):
            for part, values in ((0, f[row].real), (1, f[row].imag)):
                rep = 2 * p + part
                if start <= rep < stop:
                    np.cumsum(values[:N], out=out[rep - start, 1:])
    out[:, 1:] *= scale
    return out


def simulate_fbm(hurst: float, n: int, dt: float, seed: int) -> FbmPath:
    """One exact fBm path at times k*dt, k = 0..n-1, with B(0) = 0."""
    values = fbm_paths(hurst, n, dt, seed, 0, 1)[0]
    return FbmPath(values, float(hurst), float(dt), int(n), seed)


# ----------------------------------------------------------------------------
# stationary fields


@dataclass(frozen=True)
class Embedding:
    sqrt_eig: np.ndarray = field(repr=False)
    nx: int
    ny: int
    mx: int
    my: int
    kind: tuple[str, str]
    min_eigenvalue: float


def _axis_attempts(n: int, d: float, reach: float) -> list[tuple[str, int]]:
    compact = sfft.next_fast_len(n - 1 + int(math.ceil(reach / d)) + 1)
    minimal = max(2, 2 * (n - 1))
    if compact < minimal:
        # periodizing over a torus wider than the covariance reach is exact to 1e-17
        return [("periodic", compact * 2**k) for k in range(MAX_DOUBLINGS + 1)]
    return [("minimal", minimal * 2**k) for k in range(MAX_DOUBLINGS + 1)] + [("periodic", compact)]


def _axis_lags(kind: str, m: int, d: float) -> list[np.ndarray]:
    k = np.arange(m, dtype=float)
    if kind == "minimal":
        return [np.minimum(k, m - k) * d]
    return [np.abs(k + j * m) * d for j in (-1, 0, 1)]


@lru_cache(maxsize=16)
def field_embedding(model: CovarianceModel, nx: int, ny: int, dx: float, dy: float) -> Embedding:
    """Circulant embedding of the lattice covariance, with PSD check and retries.

    The minimal embedding (2n-2 per axis) is tried first and doubled at most
    twice.  When the covariance reach is shorter than the box, or the minimal
    embeddings are not PSD (smooth kernels on small boxes), the covariance is
    periodized over a torus wider than its reach, which is PSD and reproduces
    every lattice lag to within 1e-17.
    """
    ax = _axis_attempts(nx, dx, model.negligible_lag(0))
    ay = _axis_attempts(ny, dy, model.negligible_lag(1))
    tried, worst = [], None
    for (kx, mx), (ky, my) in zip(ax, ay):
        row = np.zeros((mx, my))
        for lx in _axis_lags(kx, mx, dx):
            for ly in _axis_lags(ky, my, dy):
                row += model(lx[:, None], ly[None, :])
        lam = sfft.fft2(row).real
        lmin, lmax = float(lam.min()), float(lam.max())
        tried.append((mx, my))
        if lmin >= -EIGEN_TOL * lmax:
            sq = np.sqrt(np.clip(lam, 0.0, None) / (mx * my))
            sq.setflags(write=False)
            return Embedding(sq, nx, ny, mx, my, (kx, ky), lmin / lmax)
        worst = lmin / lmax
    raise EmbeddingNotPSD(
        f"circulant embedding not PSD: relative min eigenvalue {worst:.3e}, sizes tried {tried}",
        min_eigenvalue=worst, sizes_tried=tried,
    )


def iter_fields(model: CovarianceModel, nx: int, ny: int, dx: float, dy: float, seed: int,
                start: int, stop: int) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(first_rep, values)`` blocks covering replications start..stop-1.

    ``values`` has shape (k, nx, ny) with unit-variance stationary fields.
    """
    emb = field_embedding(model, nx, ny, float(dx), float(dy))
    pairs = list(range(start // 2, (stop + 1) // 2))
    per_batch = max(1, BATCH_ENTRIES // (emb.mx * emb.my))
    for b0 in range(0, len(pairs), per_batch):
        chunk = pairs[b0:b0 + per_batch]
        w = np.empty((len(chunk), emb.mx, emb.my), dtype=complex)
        for row, p in enumerate(chunk):
            g = stream(seed, "field", p).standard_normal((2, emb.mx, emb.my))
            w[row].real = g[0]
            w[row].imag = g[1]
        w *= emb.sqrt_eig
        f = sfft.fft2(w, axes=(1, 2), overwrite_x=True)
        reps = [2 * p + part for p in chunk for part in (0, 1)]
        blocks = []
        for row in range(len(chunk)):
            blocks.append(f[row, :nx, :ny].real)
            blocks.append(f[row, :nx, :ny].imag)
        keep = [i for i, rep in enumerate(reps) if start <= rep < stop]
        yield reps[keep[0]], np.stack([blocks[i] for i in keep])


def field_values(model: CovarianceModel, nx: int, ny: int, dx: float, dy: float, seed: int,
                 start: int, stop: int) -> np.ndarray:
    """Stacked fields for replications start..stop-1, shape (stop-start, nx, ny)."""
    return np.concatenate([v for _, v in iter_fields(model, nx, ny, dx, dy, seed, start, stop)])


def simulate_field(model: CovarianceModel, h: Horizon, dx: float, dy: float, seed: int,
                   max_points: int = DEFAULT_MAX_POINTS) -> FieldSample:
    """One exact sample of the stationary field on the lattice covering [0,T1]x[0,T2]."""
    if not (dx > 0 and dy > 0):
        raise ConfigError(f"lattice spacings must be positive, got ({dx}, {dy})")
    nx, ny = lattice_size(h.T1, dx), lattice_size(h.T2, dy)
    if nx * ny > max_points:
        raise BudgetExceeded(f"lattice {nx}x{ny} exceeds the {max_points}-point budget")
    values = field_values(model, nx, ny, dx, dy, seed, 0, 1)[0]
    return FieldSample(values, float(dx), float(dy), nx, ny, seed)


def shift_draws(seed: int, start: int, stop: int) -> np.ndarray:
    """Common standard-normal shifts U for replications start..stop-1."""
    return np.array([stream(seed, "shift", i).standard_normal() for i in range(start, stop)])


def simulate_strong_field(model: CovarianceModel, h: Horizon, dx: float, dy: float, seed: int,
                          max_points: int = DEFAULT_MAX_POINTS) -> FieldSample:
    """Mixture sample sqrt(1-rho) Y + sqrt(rho) U with rho = r / log(T1 T2)."""
    level = rho(model, h)
    sample = simulate_field(model, h, dx, dy, seed, max_points)
    if level == 0.0:
        return sample
    shift = math.sqrt(level) * shift_draws(seed, 0, 1)[0]
    sample.values = math.sqrt(1.0 - level) * sample.values + shift
    sample.common_shift = shift
    return sample


# ----------------------------------------------------------------------------
# maxima


def max_on_subgrid(sample: FieldSample | np.ndarray, stride_x: int, stride_y: int) -> float:
    """Maximum over lattice points whose indices are multiples of the strides."""
    values = sample.values if isinstance(sample, FieldSample) else np.asarray(sample)
    nx, ny = values.shape[-2:]
    for s, n in ((stride_x, nx), (stride_y, ny)):
        if int(s) != s or s < 1:
            raise ConfigError(f"strides must be positive integers, got {s}")
        if s > n:
            raise ConfigError(f"stride {s} exceeds lattice dimension {n}")
    return float(values[::stride_x, ::stride_y].max())


def refined_max(values: np.ndarray, dx: float, dy: float, margin: float = 0.25) -> float:
    """Lattice maximum refined by a local quadratic fit around near-maximal nodes.

    For smooth (alpha = 2) fields the continuous maximum typically sits between
    nodes; each interior node within ``margin`` of the lattice maximum gets a
    3x3 central-difference quadratic, and peaks falling within one cell are
    accepted.  The result is never below the lattice maximum.
    """
    m = float(values.max())
    if min(values.shape) < 3:
        return m
    inner = values[1:-1, 1:-1]
    i, j = np.nonzero(inner >= m - margin)
    if i.size == 0:
        return m
    i = i + 1
    j = j + 1
    f = values[i, j]
    xp, xm = values[i + 1, j], values[i - 1, j]
    yp, ym = values[i, j + 1], values[i, j - 1]
    gx = (xp - xm) / (2 * dx)
    gy = (yp - ym) / (2 * dy)
    hxx = (xp - 2 * f + xm) / dx**2
    hyy = (yp - 2 * f + ym) / dy**2
    hxy = (values[i + 1, j + 1] - values[i + 1, j - 1] - values[i - 1, j + 1]
           + values[i - 1, j - 1]) / (4 * dx * dy)
    det = hxx * hyy - hxy**2
    ok = (hxx < 0) & (det > 0)
    if not ok.any():
        return m
    gx, gy, hxx, hyy, hxy, det, f = (a[ok] for a in (gx, gy, hxx, hyy, hxy, det, f))
    ox = -(hyy * gx - hxy * gy) / det
    oy = -(hxx * gy - hxy * gx) / det
    inside = (np.abs(ox) <= dx) & (np.abs(oy) <= dy)
    if not inside.any():
        return m
    peak = f + 0.5 * (gx * ox + gy * oy)
    return max(m, float(peak[inside].max()))
