"""Closed-form stationary densities of the Fokker-Planck equation with P = 1.

The steady state solves the zero-flux equation

    (lam/2) d/dw (D(|w|)^2 g) + (w - m) g = 0,

i.e. u = D^2 g satisfies (log u)' = -2 (w - m) / (lam D^2).  Integrating gives,
up to normalization,

    D = 1 - w^2        g = (1+w)^(-2 + m/(2 lam)) (1-w)^(-2 - m/(2 lam))
                           * exp(-(1 - m w) / (lam (1 - w^2)))
    D = 1 - |w|        g = (1-|w|)^(-2 - 2/lam)
                           * exp(-2 (1 - m sgn w) |w| / (lam (1 - |w|)))
    D = sqrt(1 - w^2)  g = (1+w)^((1+m)/lam - 1) (1-w)^((1-m)/lam - 1)

For D = 1 - |w| each half-line carries its own integration constant; zero
flux makes D^2 g, hence g, continuous at w = 0 and the mean equal to m.
Setting ``matched_at_zero=False`` instead uses one shared constant, which
leaves a jump exp(4 m / lam) at the origin and shifts the mean away from m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from .core import OneMinusAbs, OneMinusWSquared, RelevanceFunction, SqrtOneMinusWSquared
from .errors import ConfigError
from .grid import DensityGrid, cell_edges

VARIANTS = ("one_minus_w2", "one_minus_abs", "sqrt_one_minus_w2")
_D = {"one_minus_w2": OneMinusWSquared(), "one_minus_abs": OneMinusAbs(),
      "sqrt_one_minus_w2": SqrtOneMinusWSquared()}


@dataclass(frozen=True)
class StationarySpec:
    diffusion: str
    m: float
    lam: float
    matched_at_zero: bool = True

    def __post_init__(self):
        if self.diffusion not in VARIANTS:
            raise ConfigError(f"no closed form for diffusion {self.diffusion!r}; "
                              f"choose from {VARIANTS}", field="D")
        if not abs(self.m) < 1:
            raise ConfigError("m must lie in (-1, 1)", field="m")
        if not self.lam > 0:
            raise ConfigError("lambda must be positive", field="lambda")

    @classmethod
    def from_diffusion(cls, D: RelevanceFunction, m, lam):
        return cls(D.name, m, lam)

    @property
    def D(self) -> RelevanceFunction:
        return _D[self.diffusion]

    @property
    def beta_exponents(self):
        """(alpha, beta) with g proportional to (1+w)^(alpha-1) (1-w)^(beta-1) (sqrt case)."""
        return (1.0 + self.m) / self.lam, (1.0 - self.m) / self.lam


def _check_points(spec, w):
    w = np.asarray(w, dtype=float)
    if np.any(np.abs(w) > 1) or np.any(np.isnan(w)):
        raise ValueError("opinions must lie in [-1, 1]")
    if spec.diffusion == "sqrt_one_minus_w2" and np.any(np.abs(w) >= 1):
        raise ValueError("the sqrt_one_minus_w2 density is only evaluated on (-1, 1)")
    return w


def log_unnormalized_density(spec: StationarySpec, w):
    """Logarithm of the closed form without its normalization constant; -inf at w = +-1."""
    w = _check_points(spec, w)
    m, lam = spec.m, spec.lam
    inside = np.abs(w) < 1
    x = np.where(inside, w, 0.0)
    with np.errstate(divide="ignore"):
        if spec.diffusion == "one_minus_w2":
            k = m / (2.0 * lam)
            out = ((-2.0 + k) * np.log1p(x) + (-2.0 - k) * np.log1p(-x)
                   - (1.0 - m * x) / (lam * (1.0 - x * x)))
        elif spec.diffusion == "one_minus_abs":
            a = np.abs(x)
            s = np.where(x < 0, -1.0, 1.0)
            shape = a / (1.0 - a) if spec.matched_at_zero else 1.0 / (1.0 - a)
            out = (-2.0 - 2.0 / lam) * np.log1p(-a) - 2.0 * (1.0 - m * s) * shape / lam
        else:
            alpha, beta = spec.beta_exponents
            out = (alpha - 1.0) * np.log1p(x) + (beta - 1.0) * np.log1p(-x)
    out = np.where(inside, out, -np.inf)
    return float(out) if out.ndim == 0 else out


def unnormalized_density(spec: StationarySpec, w):
    out = np.exp(log_unnormalized_density(spec, w))
    return float(out) if np.ndim(out) == 0 else out


@lru_cache(maxsize=256)
def normalization_constant(spec: StationarySpec, quadrature_tolerance=1e-12) -> float:
    """c with c * int unnormalized = 1, by adaptive quadrature.

    Algebraic endpoint singularities of the sqrt case are handled by a
    QUADPACK algebraic weight; the other cases are split at w = 0.
    """
    opts = dict(epsabs=0.0, epsrel=quadrature_tolerance, limit=500)
    if spec.diffusion == "sqrt_one_minus_w2":
        alpha, beta = spec.beta_exponents
        Z, _ = integrate.quad(lambda w: 1.0, -1.0, 1.0, weight="alg",
                              wvar=(alpha - 1.0, beta - 1.0), **opts)
    else:
        f = lambda w: unnormalized_density(spec, w)  # noqa: E731
        Z = integrate.quad(f, -1.0, 0.0, **opts)[0] + integrate.quad(f, 0.0, 1.0, **opts)[0]
    if not (math.isfinite(Z) and Z > 0):
        raise ConfigError(f"stationary density is not integrable for {spec}")
    return 1.0 / Z


def density(spec: StationarySpec, w):
    out = normalization_constant(spec) * np.exp(log_unnormalized_density(spec, w))
    return float(out) if np.ndim(out) == 0 else out


def cell_averages(spec: StationarySpec, K) -> DensityGrid:
    """Exact cell averages of the normalized density on K uniform cells."""
    edges = cell_edges(K)
    if spec.diffusion == "sqrt_one_minus_w2":
        alpha, beta = spec.beta_exponents
        F = special.betainc(alpha, beta, (1.0 + edges) / 2.0)
        masses = np.diff(F)
    else:
        c = normalization_constant(spec)
        f = lambda w: c * unnormalized_density(spec, w)  # noqa: E731
        masses = np.array([integrate.quad(f, a, b, epsabs=0.0, epsrel=1e-12, limit=200)[0]
                           for a, b in zip(edges[:-1], edges[1:])])
    return DensityGrid.from_masses(np.maximum(masses, 0.0))


def stationary_moments(spec: StationarySpec):
    """(mean, second moment) of the normalized density by quadrature."""
    c = normalization_constant(spec)
    opts = dict(epsabs=1e-13, epsrel=1e-12, limit=500)
    out = []
    for k in (1, 2):
        if spec.diffusion == "sqrt_one_minus_w2":
            alpha, beta = spec.beta_exponents
            val = integrate.quad(lambda w: w**k, -1.0, 1.0, weight="alg",
                                 wvar=(alpha - 1.0, beta - 1.0), **opts)[0]
        else:
            f = lambda w: w**k * unnormalized_density(spec, w)  # noqa: E731
            val = integrate.quad(f, -1.0, 0.0, **opts)[0] + integrate.quad(f, 0.0, 1.0, **opts)[0]
        out.append(c * val)
    return tuple(out)


def _richardson_derivative(f, x, h, levels=4):
    table = [[None] * levels for _ in range(levels)]
    for k in range(levels):
        hk = h / 2**k
        table[k][0] = (f(x + hk) - f(x - hk)) / (2.0 * hk)
        for j in range(1, k + 1):
            table[k][j] = table[k][j - 1] + (table[k][j - 1] - table[k - 1][j - 1]) / (4**j - 1)
    return table[-1][-1]


def stationary_ode_residual(spec: StationarySpec, points) -> float:
    """max |(lam/2) (D^2 g)' + (w - m) g| over ``points``, relative to max g there.

    The derivative is taken numerically from the closed form (Richardson
    extrapolated central differences of log(D^2 g)), so the check does not
    reuse the equation the closed form was derived from.
    """
    w = np.asarray(points, dtype=float)
    dist = 1.0 - np.abs(w)
    if spec.diffusion == "one_minus_abs":
        dist = np.minimum(dist, np.abs(w))
    if np.any(dist <= 0):
        raise ValueError("residual points must avoid the singular set")
    D = spec.D

    def log_u(x):
        return 2.0 * np.log(D(x)) + log_unnormalized_density(spec, x)

    dlog_u = _richardson_derivative(log_u, w, 0.05 * dist)
    g = density(spec, w)
    residual = g * (0.5 * spec.lam * D(w) ** 2 * dlog_u + (w - spec.m))
    return float(np.max(np.abs(residual)) / np.max(g))


def interior_peaks(spec: StationarySpec, n=20001):
    """Opinions of the interior local maxima of g, located on a uniform sampling grid."""
    w = np.linspace(-1.0, 1.0, n)[1:-1]
    lg = log_unnormalized_density(spec, w)
    i = np.arange(1, w.size - 1)
    peak = (lg[i] > lg[i - 1]) & (lg[i] >= lg[i + 1])
    return w[i[peak]]


def endpoint_behavior(spec: StationarySpec):
    """'vanishing', 'finite' or 'divergent' limit of g at w = -1 and w = +1."""
    if spec.diffusion != "sqrt_one_minus_w2":
        return {-1: "vanishing", 1: "vanishing"}
    alpha, beta = spec.beta_exponents

    def kind(e):
        return "divergent" if e < 1 else ("finite" if e == 1 else "vanishing")

    return {-1: kind(alpha), 1: kind(beta)}


def jump_at_zero(spec: StationarySpec, eps=1e-12) -> float:
    """Ratio of the right and left limits of g at w = 0."""
    return float(np.exp(log_unnormalized_density(spec, eps) - log_unnormalized_density(spec, -eps)))
