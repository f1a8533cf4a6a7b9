import math

import numpy as np
import pytest

from gaussmax import limits
from gaussmax.errors import BudgetExceeded, ConfigError, EmptySample, RegimeMismatch
from gaussmax.experiments import (ExperimentConfig, box_maxima, dense_difference_study,
                                  ks_statistic, run_joint_experiment, tail_ratio_check)
from gaussmax.model import CovarianceModel, GridSpec, Horizon
from gaussmax.rng import stream

M2 = CovarianceModel(2.0, 2.0)


def test_ks_constant_zero_cdf_is_one():
    assert ks_statistic([0.1, 0.5, 2.0], lambda x: np.zeros_like(x)) == 1.0


def test_ks_single_sample_at_median():
    assert ks_statistic([0.0], lambda x: 0.5 * np.ones_like(x)) == 0.5


def test_ks_empty_sample():
    with pytest.raises(EmptySample):
        ks_statistic([], lambda x: x)


def test_ks_accepts_scalar_cdf():
    a = ks_statistic([-1.0, 0.3, 2.0], lambda v: limits.limit_cdf_marginal(v))
    b = ks_statistic([-1.0, 0.3, 2.0], lambda v: limits.limit_cdf_marginal_array(v))
    assert a == pytest.approx(b, abs=1e-9)


def test_ks_of_exact_gumbel_draws_is_small():
    # inverse transform gives exact samples of the r=0 marginal limit
    vals = []
    for seed in range(5):
        u = stream(seed, "oracle", 0).random(10**4)
        vals.append(ks_statistic(-np.log(-np.log(u)), limits.limit_cdf_marginal_array))
    assert max(vals) < 1.63 / math.sqrt(10**4)


def _cfg(**kw):
    base = dict(model=M2, horizon=[8.0], grid=GridSpec(1.0, 1.0, "sparse"), fine_dx=0.125,
                fine_dy=0.125, reps=300, eval_points=[(0.0, 0.0), (1.0, -1.0)], seed=3)
    base.update(kw)
    return ExperimentConfig(**base)


def test_fine_spacing_must_refine_grid():
    with pytest.raises(ConfigError):
        run_joint_experiment(_cfg(fine_dx=0.2))


def test_config_validation():
    with pytest.raises(ConfigError):
        _cfg(reps=0)
    with pytest.raises(ConfigError):
        _cfg(max_proxy="spline")
    with pytest.raises(ConfigError):
        _cfg(model=CovarianceModel(1.0, 2.0), max_proxy="quadratic")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({**_cfg().to_dict(), "bogus": 1})
    with pytest.raises(ConfigError):
        _cfg(constants={"H3": 1.0})


def test_config_round_trip():
    cfg = _cfg(max_proxy="quadratic", constants={"H1": 0.5})
    again = ExperimentConfig.from_dict(cfg.to_dict())
    assert again.to_dict() == cfg.to_dict()


def test_regime_mismatch():
    with pytest.raises(RegimeMismatch):
        run_joint_experiment(_cfg(grid=GridSpec(0.5, 0.5, "dense")))


def test_work_cap():
    with pytest.raises(BudgetExceeded):
        run_joint_experiment(_cfg(work_cap=1000))


def test_result_values_are_counts_over_reps():
    res = run_joint_experiment(_cfg())
    assert len(res.rows) == 2
    for row in res.rows:
        for v in (row.empirical_joint, row.empirical_x, row.empirical_y):
            assert abs(v * res.reps - round(v * res.reps)) < 1e-9
        assert row.abs_err == abs(row.empirical_joint - row.theoretical)
        assert row.empirical_joint <= min(row.empirical_x, row.empirical_y)
    assert res.label == "stationary field"
    assert res.reps == 300 and res.seed == 3


def test_stride_one_grid_equals_marginal_at_min():
    """With the grid equal to the fine lattice both maxima coincide."""
    M = box_maxima(M2, (4.0, 4.0), 0.5, 0.5, 200, 1, strides=(1, 1))
    assert np.array_equal(M[:, 0], M[:, 1])
    for x, y in ((0.0, 0.5), (1.0, -1.0), (2.5, 2.5)):
        A, B = M[:, 0] <= x, M[:, 1] <= y
        assert np.mean(A & B) == np.mean(M[:, 0] <= min(x, y))


def test_grid_max_never_exceeds_fine_max():
    res = run_joint_experiment(_cfg())
    nc = limits.norm_constants(Horizon(8, 8), M2, GridSpec(1.0, 1.0))
    Xc, Xg = res.samples[0].T
    assert np.all(Xg / nc.aT + nc.b_grid <= Xc / nc.aT + nc.bT + 1e-12)


def test_thread_count_does_not_change_result():
    a = run_joint_experiment(_cfg(reps=600), threads=1)
    b = run_joint_experiment(_cfg(reps=600), threads=3)
    assert a.table() == b.table()
    assert all(np.array_equal(x, y) for x, y in zip(a.samples, b.samples))


def test_nested_horizons_share_field():
    """Horizons sharing a lattice are corner boxes of one field, so maxima grow with T."""
    res = run_joint_experiment(_cfg(horizon=[4.0, 8.0]))
    hs = [Horizon(4, 4), Horizon(8, 8)]
    raw = []
    for h, s in zip(hs, res.samples):
        nc = limits.norm_constants(h, M2, GridSpec(1.0, 1.0))
        raw.append(s[:, 0] / nc.aT + nc.bT)
    assert np.all(raw[1] >= raw[0] - 1e-12)


def test_mixture_label_and_shift():
    res = run_joint_experiment(_cfg(model=CovarianceModel(2.0, 2.0, r=0.5)))
    assert res.label == "mixture-model verification"
    assert res.horizons[0].rho == pytest.approx(0.5 / math.log(64))


def test_box_maxima_doubling_box_raises_maxima():
    small = box_maxima(M2, (1.0, 1.0), 0.125, 0.125, 200, 5)
    wide = box_maxima(M2, (2.0, 1.0), 0.125, 0.125, 200, 5)
    assert np.mean(wide[:, 0]) > np.mean(small[:, 0])


def test_tail_ratio_rows():
    rows = tail_ratio_check(M2, (1.0, 1.0), [2.0, 3.0], 0.125, 0.125, 2000, 4,
                            grid=GridSpec(1.0, 1.0))
    assert [r.u for r in rows] == [2.0, 3.0]
    assert rows[1].predicted_p == pytest.approx(0.003867, abs=2e-6)
    for r in rows:
        assert r.ratio_low <= r.ratio <= r.ratio_high
        assert r.hits == round(r.empirical_p * 2000)
        assert r.grid_empirical_p <= r.empirical_p
        assert r.too_few_hits == (r.hits < 50)
    assert rows[1].too_few_hits


def test_tail_ratio_grid_must_align():
    with pytest.raises(ConfigError):
        tail_ratio_check(M2, (1.0, 1.0), [2.0], 0.1, 0.1, 10, 0, grid=GridSpec(0.45, 0.45))


def test_dense_study_diffs():
    study = dense_difference_study(M2, (2.0, 2.0), 2.5, [0.5, 0.25, 0.125, 0.0625], 0.0625,
                                   500, 2)
    diffs = [r.diff for r in study.rows]
    assert all(d >= 0 for d in diffs)
    assert diffs[-1] == 0.0
    assert study.rows[-1].stride == 1
    assert study.monotone
    assert diffs[0] > diffs[2]


def test_dense_study_needs_multiples():
    with pytest.raises(ConfigError):
        dense_difference_study(M2, (1.0, 1.0), 2.0, [0.3], 0.125, 10, 0)
