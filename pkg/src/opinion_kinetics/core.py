"""Opinion values, local relevance functions, noise laws and the binary exchange rule.

An interaction between two agents with opinions ``w`` and ``w_star`` in [-1, 1]
produces

    w'      = w      - gamma * P(|w|)      * (w - w_star) + eta      * D(|w|)
    w_star' = w_star - gamma * P(|w_star|) * (w_star - w) + eta_star * D(|w_star|)

and is only carried out when both post-interaction opinions stay inside
[-1, 1].  ``P`` weighs the compromise, ``D`` the random self-thinking.

Everything in this module is a pure function or an immutable value; random
draws always go through a caller-owned ``numpy.random.Generator``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import ConfigError

OPINION_MIN = -1.0
OPINION_MAX = 1.0

# sampling grid used to verify bounds and monotonicity of relevance functions
_CHECK_GRID = np.linspace(0.0, 1.0, 2001)


@dataclass(frozen=True)
class OpinionValue:
    """A single opinion, validated to lie in the closed interval [-1, 1]."""

    w: float

    def __post_init__(self):
        w = float(self.w)
        if not (OPINION_MIN <= w <= OPINION_MAX):
            raise ValueError(f"opinion {w!r} outside [-1, 1]")
        object.__setattr__(self, "w", w)

    def __float__(self):
        return self.w


def check_opinions(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.size and (np.any(w < OPINION_MIN) or np.any(w > OPINION_MAX) or np.any(np.isnan(w))):
        raise ValueError("opinions must lie in [-1, 1]")
    return w


# ---------------------------------------------------------------------------
# local relevance functions P (compromise) and D (diffusion)
# ---------------------------------------------------------------------------


class RelevanceFunction:
    """Base class for P(|w|) and D(|w|).

    Subclasses implement ``_eval(a)`` on ``a = |w|``; calling the object
    accepts scalars or arrays of signed opinions.
    """

    name = "abstract"

    def __call__(self, w):
        a = np.abs(np.asarray(w, dtype=float))
        out = self._eval(a)
        return float(out) if np.ndim(out) == 0 else out

    def _eval(self, a):
        raise NotImplementedError

    @property
    def is_constant(self) -> bool:
        return False

    def check(self, tol=1e-12):
        """Verify 0 <= f <= 1 and that f is non-increasing in |w|."""
        v = self._eval(_CHECK_GRID)
        if np.any(v < -tol) or np.any(v > 1 + tol):
            raise ConfigError(f"{self.name} must take values in [0, 1]")
        if np.any(np.diff(v) > tol):
            raise ConfigError(f"{self.name} must be non-increasing in |w|")
        return self


@dataclass(frozen=True)
class Constant(RelevanceFunction):
    name = "constant"

    def _eval(self, a):
        return np.ones_like(a)

    @property
    def is_constant(self):
        return True


@dataclass(frozen=True)
class OneMinusWSquared(RelevanceFunction):
    name = "one_minus_w2"

    def _eval(self, a):
        return 1.0 - a * a


@dataclass(frozen=True)
class OneMinusAbs(RelevanceFunction):
    name = "one_minus_abs"

    def _eval(self, a):
        return 1.0 - a


@dataclass(frozen=True)
class SqrtOneMinusWSquared(RelevanceFunction):
    """D = sqrt(1 - w^2), the diffusion of the limiting Fokker-Planck equation.

    No positive noise support keeps the kinetic rule admissible with this D,
    so it is meant for the PDE and stationary modules.
    """

    name = "sqrt_one_minus_w2"

    def _eval(self, a):
        return np.sqrt(np.maximum(0.0, 1.0 - a * a))


@dataclass(frozen=True)
class SqrtRegularized(RelevanceFunction):
    """D = sqrt((1 - (1 + gamma**p) w^2)_+), admissible for |eta| <= a_gamma."""

    p: float
    gamma: float
    name = "sqrt_regularized"

    def __post_init__(self):
        if not self.p > 0:
            raise ConfigError("p must be positive", field="p")
        if self.gamma < 0:
            raise ConfigError("gamma must be non-negative", field="gamma")

    def _eval(self, a):
        return np.sqrt(np.maximum(0.0, 1.0 - (1.0 + self.gamma**self.p) * a * a))


@dataclass(frozen=True)
class Tabulated(RelevanceFunction):
    """Custom relevance given by values at nodes in |w|, linearly interpolated."""

    abs_w: tuple
    values: tuple
    name = "tabulated"

    def __post_init__(self):
        x = np.asarray(self.abs_w, dtype=float)
        y = np.asarray(self.values, dtype=float)
        if x.ndim != 1 or x.size < 2 or x.shape != y.shape:
            raise ConfigError("tabulated function needs matching node/value lists of length >= 2")
        if x[0] != 0.0 or x[-1] != 1.0 or np.any(np.diff(x) <= 0):
            raise ConfigError("tabulated nodes must increase strictly from 0 to 1")
        object.__setattr__(self, "abs_w", tuple(x))
        object.__setattr__(self, "values", tuple(y))
        self.check()

    def _eval(self, a):
        return np.interp(a, self.abs_w, self.values)

    @property
    def is_constant(self):
        return len(set(self.values)) == 1 and self.values[0] == 1.0


COMPROMISE_FUNCTIONS = {"constant": Constant, "one_minus_w2": OneMinusWSquared}
DIFFUSION_FUNCTIONS = {
    "one_minus_abs": OneMinusAbs,
    "one_minus_w2": OneMinusWSquared,
    "sqrt_one_minus_w2": SqrtOneMinusWSquared,
    "sqrt_regularized": SqrtRegularized,
}


def compromise_function(name, **kwargs) -> RelevanceFunction:
    if name == "tabulated":
        return Tabulated(**kwargs)
    try:
        return COMPROMISE_FUNCTIONS[name](**kwargs)
    except KeyError:
        raise ConfigError(
            f"unknown compromise function {name!r}; choose from "
            f"{sorted(COMPROMISE_FUNCTIONS) + ['tabulated']}", field="P") from None


def diffusion_function(name, **kwargs) -> RelevanceFunction:
    if name == "tabulated":
        return Tabulated(**kwargs)
    try:
        return DIFFUSION_FUNCTIONS[name](**kwargs)
    except KeyError:
        raise ConfigError(
            f"unknown diffusion function {name!r}; choose from "
            f"{sorted(DIFFUSION_FUNCTIONS) + ['tabulated']}", field="D") from None


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------


def check_gamma(gamma):
    if not (0.0 < gamma < 0.5):
        raise ConfigError("gamma must lie in (0, 1/2)", field="gamma")


@dataclass(frozen=True)
class KineticParams:
    """Compromise strength ``gamma`` and noise variance ``sigma2``.

    ``lam`` (sigma2 / gamma) is always derived, never stored.
    """

    gamma: float
    sigma2: float = 0.0

    def __post_init__(self):
        check_gamma(self.gamma)
        if not self.sigma2 >= 0:
            raise ConfigError("sigma2 must be non-negative", field="sigma2")

    @classmethod
    def from_lambda(cls, gamma, lam):
        if not lam >= 0:
            raise ConfigError("lambda must be non-negative", field="lambda")
        return cls(gamma=gamma, sigma2=lam * gamma)

    @property
    def lam(self):
        return self.sigma2 / self.gamma


# ---------------------------------------------------------------------------
# noise laws
# ---------------------------------------------------------------------------


class NoiseModel:
    """Symmetric zero-mean law of the self-thinking variable eta."""

    kind = "abstract"

    @property
    def variance(self) -> float:
        raise NotImplementedError

    @property
    def effective_variance(self) -> float:
        """Variance of the law actually sampled (differs from ``variance`` after truncation)."""
        return self.variance

    @property
    def support_halfwidth(self) -> float:
        raise NotImplementedError

    def sample(self, rng, size):
        raise NotImplementedError


@dataclass(frozen=True)
class UniformNoise(NoiseModel):
    halfwidth: float
    kind = "uniform"

    def __post_init__(self):
        if not self.halfwidth >= 0:
            raise ConfigError("noise halfwidth must be non-negative", field="halfwidth")

    @classmethod
    def with_variance(cls, sigma2):
        return cls(math.sqrt(3.0 * sigma2))

    @property
    def variance(self):
        return self.halfwidth**2 / 3.0

    @property
    def support_halfwidth(self):
        return self.halfwidth

    def sample(self, rng, size):
        if self.halfwidth == 0.0:
            return np.zeros(size)
        return rng.uniform(-self.halfwidth, self.halfwidth, size)


@dataclass(frozen=True)
class TruncatedGaussianNoise(NoiseModel):
    """Gaussian N(0, sigma^2) conditioned on |eta| <= cutoff (rejection sampled).

    ``variance`` reports the declared, pre-truncation sigma^2;
    ``effective_variance`` is the exact variance of the truncated law.
    """

    sigma: float
    cutoff: float
    kind = "truncated_gaussian"

    def __post_init__(self):
        if not self.sigma >= 0 or not self.cutoff > 0:
            raise ConfigError("truncated gaussian needs sigma >= 0 and cutoff > 0")

    @property
    def variance(self):
        return self.sigma**2

    @property
    def effective_variance(self):
        if self.sigma == 0.0:
            return 0.0
        c = self.cutoff / self.sigma
        return float(stats.truncnorm(-c, c, scale=self.sigma).var())

    @property
    def support_halfwidth(self):
        return self.cutoff

    def sample(self, rng, size):
        if self.sigma == 0.0:
            return np.zeros(size)
        out = rng.normal(0.0, self.sigma, size)
        bad = np.abs(out) > self.cutoff
        while np.any(bad):
            out[bad] = rng.normal(0.0, self.sigma, int(bad.sum()))
            bad = np.abs(out) > self.cutoff
        return out


# zero-mean unit-variance base laws Y with their support half-widths
_BASE_LAWS = {
    "uniform": math.sqrt(3.0),
    "rademacher": 1.0,
    "triangular": math.sqrt(6.0),
}


@dataclass(frozen=True)
class ScaledNoise(NoiseModel):
    """eta = sigma * Y for a bounded base variable Y of zero mean and unit variance."""

    base: str
    sigma: float
    kind = "scaled"

    def __post_init__(self):
        if self.base not in _BASE_LAWS:
            raise ConfigError(f"unknown base law {self.base!r}; choose from {sorted(_BASE_LAWS)}",
                              field="base")
        if not self.sigma >= 0:
            raise ConfigError("sigma must be non-negative", field="sigma")

    @property
    def variance(self):
        return self.sigma**2

    @property
    def support_halfwidth(self):
        return self.sigma * _BASE_LAWS[self.base]

    def sample(self, rng, size):
        b = _BASE_LAWS[self.base]
        if self.base == "uniform":
            y = rng.uniform(-b, b, size)
        elif self.base == "rademacher":
            y = rng.choice(np.array([-1.0, 1.0]), size)
        else:
            y = rng.triangular(-b, 0.0, b, size)
        return self.sigma * y


def default_noise(params: KineticParams, D: RelevanceFunction) -> UniformNoise:
    """Uniform noise with variance sigma2, clipped to the admissible half-width.

    Warns when clipping changes the effective lambda.
    """
    noise = UniformNoise.with_variance(params.sigma2)
    limit = max_noise_halfwidth(D, params.gamma)
    if noise.halfwidth > limit:
        clipped = UniformNoise(limit)
        warnings.warn(
            f"noise half-width {noise.halfwidth:.6g} exceeds admissible {limit:.6g}; clipped, "
            f"effective lambda {clipped.variance / params.gamma:.6g} instead of {params.lam:.6g}",
            stacklevel=2)
        return clipped
    return noise


# ---------------------------------------------------------------------------
# the binary rule
# ---------------------------------------------------------------------------


def interact(w, w_star, params: KineticParams, P: RelevanceFunction, D: RelevanceFunction,
             eta=0.0, eta_star=0.0):
    """Raw post-interaction pair, not yet checked against [-1, 1].

    Works elementwise on arrays of pairs.
    """
    g = params.gamma
    w = np.asarray(w, dtype=float)
    w_star = np.asarray(w_star, dtype=float)
    diff = w - w_star
    w_new = w - g * P(w) * diff + eta * D(w)
    w_star_new = w_star + g * P(w_star) * diff + eta_star * D(w_star)
    if w_new.ndim == 0:
        return float(w_new), float(w_star_new)
    return w_new, w_star_new


def is_admissible(w_prime, w_star_prime):
    ok = (np.abs(w_prime) <= 1.0) & (np.abs(w_star_prime) <= 1.0)
    return bool(ok) if np.ndim(ok) == 0 else ok


def restitution_coefficient(w, w_star, gamma, P: RelevanceFunction):
    """Noise-free contraction factor of the opinion difference of a pair.

    |w' - w_star'| = eps * |w - w_star| with eps = 1 - gamma * (P(|w|) + P(|w_star|)).
    """
    check_gamma(gamma)
    eps = 1.0 - gamma * (P(w) + P(w_star))
    return eps


def max_noise_halfwidth(D: RelevanceFunction, gamma, w=None) -> float:
    """Largest a such that |eta| <= a keeps every interaction admissible.

    For ``one_minus_w2`` the bound depends on the agent's own opinion; without
    ``w`` the worst case |w| = 1 is returned.  Functions with no known bound
    return 0.
    """
    check_gamma(gamma)
    if isinstance(D, OneMinusAbs):
        return 1.0 - gamma
    if isinstance(D, OneMinusWSquared):
        a = 1.0 if w is None else abs(float(w))
        return (1.0 - gamma) / (1.0 + a)
    if isinstance(D, SqrtRegularized):
        gp = D.gamma**D.p
        return (1.0 - gamma) * math.sqrt(gp) / math.sqrt(1.0 + gp)
    return 0.0


@dataclass(frozen=True)
class InitialCondition:
    """Initial opinion law: ``uniform`` on [-1, 1] or ``tilted`` density (1 + 3 m w) / 2.

    The tilted law has mean ``mean`` and requires |mean| <= 1/3.
    """

    kind: str = "uniform"
    mean: float = 0.0

    def __post_init__(self):
        if self.kind not in ("uniform", "tilted"):
            raise ConfigError(f"unknown initial condition {self.kind!r}", field="initial.kind")
        if self.kind == "uniform" and self.mean != 0.0:
            raise ConfigError("uniform initial condition has mean 0", field="initial.mean")
        if self.kind == "tilted" and not abs(self.mean) <= 1.0 / 3.0:
            raise ConfigError("tilted initial condition needs |mean| <= 1/3", field="initial.mean")

    def sample(self, rng, n):
        u = rng.random(n)
        if self.kind == "uniform" or self.mean == 0.0:
            return 2.0 * u - 1.0
        # invert F(w) = (w + 1)/2 + 3 m (w^2 - 1)/4; cancellation-free root
        a = 0.75 * self.mean
        c = 0.5 - a - u
        w = -2.0 * c / (0.5 + np.sqrt(0.25 - 4.0 * a * c))
        return np.clip(w, -1.0, 1.0)

    def cdf(self, w):
        w = np.asarray(w, dtype=float)
        return (w + 1.0) / 2.0 + 0.75 * self.mean * (w * w - 1.0)
