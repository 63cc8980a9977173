import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opinion_kinetics.core import (
    Constant,
    InitialCondition,
    KineticParams,
    OneMinusAbs,
    OneMinusWSquared,
    Tabulated,
    UniformNoise,
)
from opinion_kinetics.errors import ConfigError
from opinion_kinetics.kinetic import (
    Ensemble,
    SimConfig,
    estimate_density,
    make_config,
    mc_step,
    moment_law_check,
    moments,
    replica_rng,
    simulate,
    sweep_contraction_factor,
)


def test_replica_streams_are_keyed():
    a = replica_rng(5, 0).random(4)
    assert np.array_equal(a, replica_rng(5, 0).random(4))
    assert not np.array_equal(a, replica_rng(5, 1).random(4))
    assert not np.array_equal(a, replica_rng(6, 0).random(4))
    with pytest.raises(ConfigError):
        replica_rng(-1)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 200), st.floats(0.01, 0.49), st.integers(0, 2**32))
def test_noise_free_sweep_conserves_the_mean(n, gamma, seed):
    cfg = make_config(n, gamma, 0.0, t_end=1)
    rng = replica_rng(seed)
    ens = Ensemble(rng.uniform(-1, 1, n))
    before = ens.opinions.sum()
    mc_step(ens, cfg, rng)
    assert ens.opinions.sum() == pytest.approx(before, abs=1e-12)
    assert ens.time == 1.0 and ens.rejected == 0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32), st.floats(0.5, 3.0))
def test_rejected_moves_leave_pairs_unchanged(seed, width):
    # D = 1 everywhere and wide noise: many proposals leave [-1, 1]
    flat = Tabulated((0.0, 1.0), (1.0, 1.0))
    cfg = SimConfig(n=64, params=KineticParams(0.2, width**2 / 3), P=Constant(), D=flat,
                    noise=UniformNoise(width), t_end=1)
    rng = replica_rng(seed)
    ens = Ensemble(rng.uniform(-1, 1, 64))
    mc_step(ens, cfg, rng)
    assert np.all(np.abs(ens.opinions) <= 1)
    assert 0 <= ens.rejected <= ens.proposed == 32


def test_histogram_edge_convention():
    grid = estimate_density(np.zeros(10), 4)
    assert np.allclose(grid.values * grid.h, [0, 0, 1, 0])
    grid = estimate_density(np.array([-1.0, 1.0]), 4)
    assert np.allclose(grid.values * grid.h, [0.5, 0, 0, 0.5])
    assert grid.mass == pytest.approx(1.0)


def test_moments_two_pass():
    w = np.full(1000, 0.7) + 1e-9 * np.arange(1000)
    m, m2, c = moments(w)
    assert c == pytest.approx(np.var(np.arange(1000) * 1e-9), rel=1e-6)


def test_simulation_independent_of_thread_count():
    cfg = make_config(2000, 0.1, 0.02, D=OneMinusWSquared(), t_end=20, realizations=5, seed=11,
                      initial=InitialCondition("tilted", 0.1))
    a = simulate(cfg, threads=1)
    b = simulate(cfg, threads=3)
    assert np.array_equal(a.pooled_histogram.values, b.pooled_histogram.values)
    assert np.array_equal(a.pooled_series.c_f, b.pooled_series.c_f)
    assert a.rejected_fraction == b.rejected_fraction


def test_pooled_spread_equals_spread_of_union():
    cfg = make_config(1000, 0.05, 0.01, t_end=5, realizations=4, seed=3)
    res = simulate(cfg)
    # rebuild the union from the per-replica moments
    last = [s[-1] for s in res.series]
    m = np.mean([r.mean for r in last])
    m2 = np.mean([r.second_moment for r in last])
    assert res.pooled_series[-1].c_f == pytest.approx(m2 - m * m, rel=1e-10)


def test_contraction_factor_limits():
    assert sweep_contraction_factor(0.1, 10**9) == pytest.approx(1 - 0.18, rel=1e-8)
    assert sweep_contraction_factor(0.25, 4) == pytest.approx(1 - 2 * 0.25 * 0.75 * 4 / 3)


def test_moment_law_check_preconditions():
    cfg = make_config(100, 0.1, t_end=5)
    res = simulate(cfg)
    with pytest.raises(ValueError, match="too short"):
        moment_law_check(res.pooled_series, cfg)
    cfg2 = make_config(100, 0.1, P=OneMinusWSquared(), t_end=20)
    with pytest.raises(ValueError, match="constant"):
        moment_law_check(simulate(cfg2).pooled_series, cfg2)


def test_config_validation():
    with pytest.raises(ConfigError):
        make_config(1, 0.1, t_end=1)
    with pytest.raises(ConfigError):
        make_config(10, 0.1, t_end=0)
    with pytest.raises(ConfigError):
        make_config(10, 0.1, t_end=1, histogram_bins=1)


def test_noise_keeps_ensemble_in_range_for_default_law():
    cfg = make_config(5000, 0.3, 0.1, D=OneMinusAbs(), t_end=30, seed=4)
    res = simulate(cfg)
    assert res.rejected_fraction == 0.0
    assert np.all(np.isfinite(res.pooled_series.c_f))
