import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from opinion_kinetics.core import KineticParams, OneMinusWSquared, SqrtRegularized
from opinion_kinetics.errors import ConfigError
from opinion_kinetics.grid import DensityGrid
from opinion_kinetics.limit_lab import (
    SweepConfig,
    coarsen,
    distance,
    effective_noise,
    monotone_verdict,
    regime_run,
    regularized_effective_lambda,
    run_sweep,
)

grids = arrays(float, 40, elements=st.floats(0.0, 5.0)).filter(lambda a: a.sum() > 0).map(
    DensityGrid.from_masses)


def test_distance_examples():
    K = 400
    a = DensityGrid.point_mass(0.0, K)
    b = DensityGrid.point_mass(0.5, K)
    assert distance(a, a) == 0.0
    assert distance(a, b, "Wasserstein1") == pytest.approx(0.5, abs=2.0 / K)
    u = DensityGrid.uniform(K)
    direct = sum(abs(x - y) * (2.0 / K) for x, y in zip(u.values, a.values))
    assert distance(u, a) == pytest.approx(direct, rel=1e-12)
    assert distance(u, a) == pytest.approx(2 * (1 - 0.5 * 2.0 / K), rel=1e-12)
    with pytest.raises(ValueError):
        distance(a, DensityGrid.uniform(10))
    with pytest.raises(ConfigError):
        distance(a, b, "KL")


@given(grids, grids, st.sampled_from(["L1", "Wasserstein1"]))
def test_distance_is_a_metric(a, b, metric):
    d = distance(a, b, metric)
    assert d >= 0
    assert d == pytest.approx(distance(b, a, metric), abs=1e-15)
    assert distance(a, a, metric) == 0.0
    if not np.array_equal(a.values, b.values):
        assert d > 0 or np.allclose(a.values, b.values)


def test_coarsen_preserves_mass():
    g = DensityGrid.from_masses(np.arange(1.0, 401.0))
    c = coarsen(g, 100)
    assert c.K == 100 and c.mass == pytest.approx(1.0)


def test_monotone_verdict_tolerance():
    assert monotone_verdict([0.3, 0.2, 0.1], [0.01] * 3)
    assert monotone_verdict([0.2, 0.205, 0.1], [0.01] * 3)
    assert not monotone_verdict([0.2, 0.3, 0.1], [0.01] * 3)


def test_sweep_config_validation():
    base = dict(lam=0.5, D=OneMinusWSquared(), n=100, realizations=2, tau_end=1.0)
    with pytest.raises(ConfigError):
        SweepConfig((0.05, 0.1), **base)
    with pytest.raises(ConfigError):
        SweepConfig((0.6,), **base)
    with pytest.raises(ConfigError):
        SweepConfig((0.1,), metric="KL", **base)


def test_lambda_bookkeeping_is_exact():
    for gamma in (0.1, 0.03):
        p = KineticParams.from_lambda(gamma, 0.5)
        assert p.lam == pytest.approx(0.5, rel=1e-15)
        assert effective_noise(OneMinusWSquared(), gamma, 0.5).variance == pytest.approx(0.5 * gamma)


def test_small_sweep_reports_every_column():
    sweep = SweepConfig((0.12, 0.06), 0.5, OneMinusWSquared(), n=5000, realizations=4, tau_end=3.0,
                        seed=5, n_boot=30)
    res = run_sweep(sweep)
    assert res.target == "closed_form"
    for row in res.rows:
        assert row.effective_lambda == pytest.approx(0.5)
        assert np.isfinite([row.L1_to_fp, row.L1_to_closed_form, row.W1_to_fp, row.distance_se]).all()
        # the long-time solver profile and the closed form agree closely
        assert abs(row.L1_to_fp - row.L1_to_closed_form) < 5e-3


def test_regularized_sweep_uses_sqrt_limit():
    sweep = SweepConfig((0.1,), 1.0, SqrtRegularized(2 / 3, 0.1), n=2000, realizations=2,
                        tau_end=1.0, n_boot=10)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = run_sweep(sweep)
    row = res.rows[0]
    a = 0.9 * 0.1 ** (1 / 3) / math.sqrt(1 + 0.1 ** (2 / 3))
    assert row.effective_lambda == pytest.approx(a * a / 3 / 0.1, rel=1e-12)
    assert math.isfinite(row.L1_to_closed_form)


def test_regularized_lambda_formula():
    for g in (1e-2, 1e-3):
        expected = (1 - g) ** 2 / (3 * g ** (1 / 3) * (1 + g ** (2 / 3)))
        assert regularized_effective_lambda(2 / 3, g) == pytest.approx(expected, rel=1e-12)
    sampled = regularized_effective_lambda(2 / 3, 1e-2, samples=400_000)
    assert sampled == pytest.approx(regularized_effective_lambda(2 / 3, 1e-2), rel=1e-2)


def test_regime_runs_report_both_limits():
    diff = regime_run(0.05, 0.5, 0.5, OneMinusWSquared(), n=5000, realizations=2, kinetic_time=40)
    drift = regime_run(0.05, 2.0, 0.5, OneMinusWSquared(), n=5000, realizations=2, kinetic_time=40)
    for r in (diff, drift):
        assert np.isfinite([r.to_pure_diffusion, r.to_pure_drift]).all()
        assert r.closer in ("diffusion", "drift")
    assert drift.closer == "drift"
