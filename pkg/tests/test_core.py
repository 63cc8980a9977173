import math

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
    OpinionValue,
    ScaledNoise,
    SqrtOneMinusWSquared,
    SqrtRegularized,
    Tabulated,
    TruncatedGaussianNoise,
    UniformNoise,
    compromise_function,
    default_noise,
    diffusion_function,
    interact,
    is_admissible,
    max_noise_halfwidth,
    restitution_coefficient,
)
from opinion_kinetics.errors import ConfigError

opinions = st.floats(-1.0, 1.0, allow_nan=False)
gammas = st.floats(1e-6, 0.5, exclude_max=True)
compromises = st.sampled_from([Constant(), OneMinusWSquared()])


def test_opinion_value_bounds():
    assert float(OpinionValue(1.0)) == 1.0
    with pytest.raises(ValueError):
        OpinionValue(1.0000001)


@pytest.mark.parametrize("gamma", [0.0, 0.5, 0.7, -0.1])
def test_gamma_outside_open_interval_rejected(gamma):
    with pytest.raises(ConfigError, match=r"gamma must lie in \(0, 1/2\)"):
        KineticParams(gamma)


def test_lambda_is_derived():
    p = KineticParams.from_lambda(0.1, 0.5)
    assert p.sigma2 == pytest.approx(0.05)
    assert p.lam == pytest.approx(0.5)


@pytest.mark.parametrize("f", [Constant(), OneMinusWSquared(), OneMinusAbs(),
                               SqrtOneMinusWSquared(), SqrtRegularized(2 / 3, 0.01)])
def test_relevance_functions_bounded_and_nonincreasing(f):
    f.check(1e-12)
    x = np.linspace(-1, 1, 501)
    y = f(x)
    assert np.all((y >= 0) & (y <= 1))
    assert np.allclose(y, f(-x))


def test_relevance_values():
    assert OneMinusWSquared()(0.5) == pytest.approx(0.75)
    assert OneMinusAbs()(-0.25) == pytest.approx(0.75)
    assert SqrtOneMinusWSquared()(0.6) == pytest.approx(0.8)
    assert Constant()(0.3) == 1.0


def test_tabulated_rejects_increasing_values():
    with pytest.raises(ConfigError):
        Tabulated((0.0, 1.0), (0.2, 0.9))
    t = Tabulated((0.0, 0.5, 1.0), (1.0, 0.5, 0.0))
    assert t(0.25) == pytest.approx(0.75)


def test_registries():
    assert isinstance(compromise_function("one_minus_w2"), OneMinusWSquared)
    assert isinstance(diffusion_function("sqrt_one_minus_w2"), SqrtOneMinusWSquared)
    with pytest.raises(ConfigError):
        diffusion_function("cubic")


def test_interaction_examples():
    p = KineticParams(0.25)
    assert interact(0.5, -0.5, p, Constant(), OneMinusAbs()) == pytest.approx((0.25, -0.25))
    # noise enters through D(|w|)
    w, ws = interact(0.0, 0.0, KineticParams(0.1), Constant(), OneMinusAbs(), 0.3, -0.2)
    assert (w, ws) == pytest.approx((0.3, -0.2))


@given(opinions, opinions, gammas, compromises)
def test_difference_contracts_by_restitution_coefficient(w, ws, gamma, P):
    p = KineticParams(gamma)
    a, b = interact(w, ws, p, P, OneMinusAbs())
    eps = restitution_coefficient(w, ws, gamma, P)
    assert a - b == pytest.approx(eps * (w - ws), abs=1e-12)
    assert 0 <= eps <= 1


@given(opinions, opinions, gammas, compromises)
def test_noise_free_pair_sum(w, ws, gamma, P):
    a, b = interact(w, ws, KineticParams(gamma), P, OneMinusAbs())
    assert a + b == pytest.approx(w + ws + gamma * (w - ws) * (P(ws) - P(w)), abs=1e-12)
    assert is_admissible(a, b)


@settings(max_examples=300)
@given(opinions, opinions, gammas, st.floats(-1, 1), st.floats(-1, 1),
       st.sampled_from([OneMinusAbs(), OneMinusWSquared(), "reg"]))
def test_noise_within_bound_is_admissible(w, ws, gamma, u, v, D):
    if D == "reg":
        D = SqrtRegularized(2 / 3, gamma)
    a = max_noise_halfwidth(D, gamma)
    wn, wsn = interact(w, ws, KineticParams(gamma), Constant(), D, u * a, v * a)
    assert abs(wn) <= 1 + 1e-12 and abs(wsn) <= 1 + 1e-12


def test_max_noise_halfwidth_values():
    assert max_noise_halfwidth(OneMinusAbs(), 0.2) == pytest.approx(0.8)
    assert max_noise_halfwidth(OneMinusWSquared(), 0.2) == pytest.approx(0.4)
    assert max_noise_halfwidth(OneMinusWSquared(), 0.2, w=0.5) == pytest.approx(0.8 / 1.5)
    g = 0.001
    expected = 0.999 * g ** (1 / 3) / math.sqrt(1 + g ** (2 / 3))
    got = max_noise_halfwidth(SqrtRegularized(2 / 3, g), g)
    assert got == pytest.approx(expected, rel=1e-14)
    assert got == pytest.approx(0.0995, abs=1e-4)
    assert max_noise_halfwidth(SqrtOneMinusWSquared(), 0.1) == 0.0


def test_default_noise_clipping_warns():
    p = KineticParams.from_lambda(0.1, 5.0)
    with pytest.warns(UserWarning, match="effective lambda"):
        noise = default_noise(p, OneMinusWSquared())
    assert noise.halfwidth == pytest.approx(0.45)
    exact = default_noise(KineticParams.from_lambda(0.1, 0.5), OneMinusWSquared())
    assert exact.variance == pytest.approx(0.05)


@pytest.mark.parametrize("noise", [UniformNoise(0.3), ScaledNoise("rademacher", 0.2),
                                   ScaledNoise("triangular", 0.2), ScaledNoise("uniform", 0.2),
                                   TruncatedGaussianNoise(0.2, 2.0)])
def test_noise_sample_moments(noise):
    x = noise.sample(np.random.default_rng(3), 400_000)
    assert np.max(np.abs(x)) <= noise.support_halfwidth + 1e-12
    assert abs(x.mean()) < 5 * math.sqrt(noise.effective_variance / x.size)
    assert x.var() == pytest.approx(noise.effective_variance, rel=1e-2)


def test_initial_condition_tilted():
    ic = InitialCondition("tilted", 0.2)
    x = ic.sample(np.random.default_rng(0), 400_000)
    assert x.mean() == pytest.approx(0.2, abs=3e-3)
    assert ic.cdf(-1.0) == 0.0 and ic.cdf(1.0) == 1.0
    # empirical CDF matches the closed form
    q = np.array([-0.5, 0.0, 0.5])
    assert np.allclose([np.mean(x <= t) for t in q], ic.cdf(q), atol=3e-3)
    with pytest.raises(ConfigError):
        InitialCondition("tilted", 0.5)
