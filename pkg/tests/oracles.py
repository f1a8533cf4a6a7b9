"""Independent reference values computed without the package under test."""

import math

import mpmath as mp

mp.mp.dps = 30


def normal_tail(u) -> float:
    return float(mp.ncdf(-u))


def a_T(T1, T2) -> float:
    return float(mp.sqrt(2 * mp.log(mp.mpf(T1) * T2)))


def centering(T1, T2, scale, power, base="aT2") -> float:
    """a + log((2 pi)^-1/2 * scale * L^power)/a with L = a^2 (or a for base='aT')."""
    a = mp.sqrt(2 * mp.log(mp.mpf(T1) * T2))
    L = a**2 if base == "aT2" else a
    return float(a + mp.log(scale / mp.sqrt(2 * mp.pi) * L**power) / a)


def discrete_brownian_pickands(delta: float, terms: int = 200_000) -> float:
    """H_{delta,1} = exp(-2 sum_k Phi(-sqrt(k delta / 2)) / k) / delta.

    The series is the random-walk (Spitzer) identity for the discrete Pickands
    constant of Brownian motion with drift.
    """
    s = mp.mpf(0)
    for k in range(1, terms):
        term = mp.ncdf(-mp.sqrt(k * mp.mpf(delta) / 2)) / k
        s += term
        if term < mp.mpf(10) ** -25:
            break
    return float(mp.exp(-2 * s) / delta)


def tail_solution(T1, T2, alpha1, alpha2, H1, H2, x):
    """Level u with T1 T2 H1 H2 u^(2/alpha1 + 2/alpha2) Psi(u) = e^-x, by root finding."""
    c = mp.mpf(2) / alpha1 + mp.mpf(2) / alpha2
    f = lambda u: mp.log(T1 * T2 * H1 * H2 * u**c * mp.ncdf(-u)) + x
    return float(mp.findroot(f, mp.sqrt(2 * mp.log(T1 * T2))))
