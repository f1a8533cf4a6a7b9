import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gaussmax import limits as lm
from gaussmax.errors import DomainError, HorizonTooSmall, InvalidConstants, QuadratureNotConverged
from gaussmax.model import CovarianceModel, GridSpec, Horizon
from gaussmax.rng import stream
from oracles import a_T, centering, normal_tail, tail_solution

GRID = (-2.0, -1.0, 0.0, 1.0, 2.0)
M2 = CovarianceModel(2, 2)
H2 = 1 / math.sqrt(math.pi)


def test_a_T():
    nc = lm.norm_constants(Horizon(100, 100), M2)
    assert nc.aT == pytest.approx(a_T(100, 100), rel=1e-15)
    assert nc.aT == pytest.approx(4.291932, abs=1e-6)


def test_literal_b_T_example():
    nc = lm.norm_constants(Horizon(100, 100), M2, H1=H2, H2=H2, convention="literal")
    assert nc.bT == pytest.approx(centering(100, 100, 1 / math.pi, 0.5, base="aT"), rel=1e-14)
    assert nc.bT == pytest.approx(3.980817, abs=1e-5)


@pytest.mark.parametrize("alphas,T", [((2, 2), 100.0), ((1, 1), 1e3), ((1, 2), 1e5)])
def test_corrected_b_T_solves_tail_equation_asymptotically(alphas, T):
    """b_T + x/a_T approaches the exact solution of T1 T2 H1 H2 u^c Psi(u) = e^-x."""
    m = CovarianceModel(*alphas)
    gaps = []
    for TT in (T, T**2, T**4):
        nc = lm.norm_constants(Horizon(TT, TT), m)
        H1, H2_ = lm.known_pickands(m.alpha1), lm.known_pickands(m.alpha2)
        u = tail_solution(TT, TT, m.alpha1, m.alpha2, H1, H2_, 0.0)
        gaps.append(nc.aT * abs(nc.bT - u))
    assert gaps[-1] < gaps[0]
    assert gaps[-1] < 0.2


def test_corrected_b_T_matches_oracle():
    nc = lm.norm_constants(Horizon(100, 100), M2, GridSpec(0.5, 0.25))
    assert nc.bT == pytest.approx(centering(100, 100, 1 / math.pi, 0.5), rel=1e-14)
    assert nc.bTp == pytest.approx(centering(100, 100, 8.0, -0.5), rel=1e-14)


def test_baT_equals_bT_for_equal_constants():
    nc = lm.norm_constants(Horizon(50, 80), M2, H1=H2, H2=H2, Ha1=H2, Ha2=H2)
    assert nc.baT == nc.bT


def test_norm_constants_domain_errors():
    with pytest.raises(DomainError):
        lm.norm_constants(Horizon(10, 10), M2, H1=-1.0)
    with pytest.raises(DomainError):
        lm.norm_constants(Horizon(10, 10), M2, Ha1=0.5)
    with pytest.raises(DomainError):
        lm.norm_constants(Horizon(10, 10), CovarianceModel(1.5, 1.5))
    with pytest.raises(DomainError):
        lm.norm_constants(Horizon(10, 10), M2, convention="other")


def test_b_grid_by_regime():
    h = Horizon(64, 64)
    sparse = lm.norm_constants(h, M2, GridSpec(2, 2, "sparse"))
    dense = lm.norm_constants(h, M2, GridSpec(0.01, 0.01, "dense"))
    pick = lm.norm_constants(h, M2, GridSpec(None, None, "pickands", 1, 1), Ha1=0.4, Ha2=0.4)
    assert sparse.b_grid == sparse.bTp
    assert dense.b_grid == dense.bT
    assert pick.b_grid == pick.baT


def test_u_star_at_r_zero():
    nc = lm.norm_constants(Horizon(100, 100), M2, GridSpec(1, 1))
    for x in GRID:
        assert lm.u_star(x, 0.0, 0.7, nc) == nc.bT + x / nc.aT
        assert lm.u_star(x, 0.0, 0.7, nc, "grid") == nc.bTp + x / nc.aT


def test_u_star_first_order_gap_at_T_1e4():
    nc = lm.norm_constants(Horizon(1e4, 1e4), M2)
    x, z = np.meshgrid(np.linspace(-2, 2, 41), np.linspace(-2, 2, 41))
    gap = np.abs(lm.u_star(x, 0.5, z, nc) - lm.u_star_first_order(x, 0.5, z, nc))
    assert gap.max() < 1e-2


def test_u_star_gap_times_aT_vanishes():
    scaled = []
    for T in (1e2, 1e4, 1e8, 1e16, 1e32):
        nc = lm.norm_constants(Horizon(T, T), M2)
        gap = abs(lm.u_star(1.0, 0.5, -1.0, nc) - lm.u_star_first_order(1.0, 0.5, -1.0, nc))
        scaled.append(gap * nc.aT)
    assert all(b < a for a, b in zip(scaled, scaled[1:]))
    assert scaled[-1] < 0.05


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0, 2), st.floats(-3, 3))
def test_u_star_increasing_in_x(x, dx, r, z):
    nc = lm.norm_constants(Horizon(1e3, 1e3), M2)
    if dx > 1e-9:
        assert lm.u_star(x + dx, r, z, nc) > lm.u_star(x, r, z, nc)


def test_u_star_rho_too_large():
    nc = lm.norm_constants(Horizon(2, 2), M2)
    with pytest.raises(HorizonTooSmall):
        lm.u_star(0.0, 5.0, 0.0, nc)


def test_closed_forms_at_r_zero():
    for x in GRID:
        for y in GRID:
            assert lm.limit_cdf_sparse(lm.LimitQuery(x, y)) == pytest.approx(
                math.exp(-math.exp(-x) - math.exp(-y)), abs=1e-10)
            assert lm.limit_cdf_dense(lm.LimitQuery(x, y, regime="dense")) == pytest.approx(
                math.exp(-math.exp(-min(x, y))), abs=1e-10)
            joint = 0.2 * min(math.exp(-x), math.exp(-y))
            q = lm.LimitQuery(x, y, 0.0, "pickands", joint)
            assert lm.limit_cdf_pickands(q) == pytest.approx(
                math.exp(-(math.exp(-x) + math.exp(-y) - joint)), abs=1e-10)
        assert lm.limit_cdf_marginal(x) == pytest.approx(math.exp(-math.exp(-x)), abs=1e-10)
    assert lm.limit_cdf_sparse(lm.LimitQuery(0, 0)) == pytest.approx(0.135335, abs=1e-6)
    assert lm.limit_cdf_marginal(0.0) == pytest.approx(0.367879, abs=1e-6)


def test_dense_example_and_identities():
    assert lm.limit_cdf_dense(lm.LimitQuery(0, 1, 0.0, "dense")) == pytest.approx(math.exp(-1), abs=1e-12)
    for r in (0.0, 0.5, 1.3):
        for x, y in ((0.3, -1.2), (2.0, 1.0)):
            v = lm.limit_cdf_dense(lm.LimitQuery(x, y, r, "dense"))
            assert v == lm.limit_cdf_dense(lm.LimitQuery(min(x, y), min(x, y), r, "dense"))
            assert v == lm.limit_cdf_marginal(min(x, y), r)


@given(st.floats(-4, 4), st.floats(-4, 4), st.floats(0, 2))
def test_sparse_symmetric(x, y, r):
    a = lm.limit_cdf_sparse(lm.LimitQuery(x, y, r))
    b = lm.limit_cdf_sparse(lm.LimitQuery(y, x, r))
    assert a == b


def test_pickands_with_zero_joint_is_sparse():
    for r in (0.0, 0.7):
        for x, y in ((0, 0), (1, -1), (-0.5, 2)):
            assert lm.limit_cdf_pickands(lm.LimitQuery(x, y, r, "pickands", 0.0)) == \
                lm.limit_cdf_sparse(lm.LimitQuery(x, y, r))


def test_pickands_monotone_for_fixed_constants():
    for r in (0.0, 0.5):
        vals = np.array([[lm.limit_cdf_pickands(lm.LimitQuery(x, y, r, "pickands", 0.05))
                          for y in GRID] for x in GRID])
        assert np.all(np.diff(vals, axis=0) >= 0)
        assert np.all(np.diff(vals, axis=1) >= 0)


def test_pickands_rejects_inconsistent_joint_constant():
    with pytest.raises(InvalidConstants):
        lm.limit_cdf_pickands(lm.LimitQuery(0, 0, 0.5, "pickands", 2.5))
    with pytest.raises(InvalidConstants):
        lm.limit_cdf_pickands(lm.LimitQuery(0, 0, 0.5, "pickands", None))
    with pytest.raises(InvalidConstants):
        lm.limit_cdf_pickands(lm.LimitQuery(0, 0, 0.5, "pickands", -0.1))


@pytest.mark.parametrize("r", [0.2, 0.5, 1.0])
def test_mixture_integrals_match_monte_carlo(r):
    z = stream(99, "oracle", 1).standard_normal(10**6)
    scale = np.exp(math.sqrt(2 * r) * z - r)
    for x, y in ((0.0, 0.0), (1.0, -1.0)):
        f = np.exp(-(math.exp(-x) + math.exp(-y)) * scale)
        assert abs(lm.limit_cdf_sparse(lm.LimitQuery(x, y, r)) - f.mean()) < 3 * f.std() / 1e3
        g = np.exp(-math.exp(-x) * scale)
        assert abs(lm.limit_cdf_marginal(x, r) - g.mean()) < 3 * g.std() / 1e3


def test_marginal_tails():
    for r in (0.0, 0.5, 2.0):
        assert lm.limit_cdf_marginal(-20.0, r) < 1e-6
        assert lm.limit_cdf_marginal(20.0, r) > 1 - 1e-6


def test_sparse_with_sure_second_event_is_marginal():
    for r in (0.0, 0.4):
        for x in GRID:
            assert lm.limit_cdf_sparse(lm.LimitQuery(x, 60.0, r)) == pytest.approx(
                lm.limit_cdf_marginal(x, r), abs=1e-10)


@given(st.floats(-6, 6), st.floats(0, 0.5), st.floats(0, 2))
def test_cdfs_in_unit_interval_and_monotone(x, dx, r):
    lo = lm.limit_cdf_marginal(x, r)
    hi = lm.limit_cdf_marginal(x + dx, r)
    assert 0.0 <= lo <= hi <= 1.0


def test_marginal_array_matches_scalar():
    xs = np.linspace(-3, 5, 17)
    arr = lm.limit_cdf_marginal_array(xs, 0.5)
    np.testing.assert_allclose(arr, [lm.limit_cdf_marginal(x, 0.5) for x in xs], atol=2e-10)


def test_quadrature_gives_up_beyond_512_nodes():
    with pytest.raises(QuadratureNotConverged):
        lm.limit_cdf_sparse(lm.LimitQuery(-4.0, -4.0, 25.0))


def test_nodes_used_reported():
    value, nodes = lm.evaluate_limit(lm.LimitQuery(0.0, 0.0, 1.0))
    assert nodes in (32, 64, 128, 256, 512)
    assert 0 < value < 1


def test_tail_prediction_continuous_example():
    p = lm.tail_prediction_continuous(M2, (1, 1), 3.0)
    assert p == pytest.approx(9 / math.pi * normal_tail(3.0), rel=1e-12)
    assert p == pytest.approx(0.003867, abs=2e-6)
    assert lm.tail_prediction_continuous(M2, (2, 1), 3.0) == 2 * p
    assert lm.tail_prediction_continuous(M2, (1, 1), 4.0) < p
    with pytest.raises(DomainError):
        lm.tail_prediction_continuous(M2, (1, 1), 0.0)


def test_tail_prediction_sparse_grid_example():
    p = lm.tail_prediction_sparse_grid(GridSpec(0.5, 0.5), (1, 1), 3.0)
    assert p == pytest.approx(4 * normal_tail(3.0), rel=1e-12)
    assert p == pytest.approx(0.00539959, abs=1e-8)
    assert lm.tail_prediction_sparse_grid(GridSpec(0.25, 0.5), (1, 1), 3.0) == pytest.approx(2 * p)
    joint = lm.tail_prediction_sparse_grid(GridSpec(0.5, 0.5), (1, 1), 3.0, x=40.0, H_product=1 / math.pi)
    assert joint == pytest.approx(p, rel=1e-15)
    assert lm.tail_prediction_sparse_grid(GridSpec(0.5, 0.5), (1, 1), 3.0, x=0.0, H_product=0.5) == \
        pytest.approx(1.5 * p)
