"""Quasi-invariant limit experiments: kinetic Monte Carlo against the Fokker-Planck limit.

For each gamma of a decreasing list the noise variance is set to
sigma^2 = lam * gamma, the ensemble is run to kinetic time tau_end / gamma and
the pooled final histogram is compared with the long-time Fokker-Planck
profile and, where one exists, the closed-form stationary density.  All
comparisons use the effective lambda realized by the (possibly clipped)
noise law.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import (
    Constant,
    InitialCondition,
    KineticParams,
    OneMinusAbs,
    OneMinusWSquared,
    RelevanceFunction,
    SqrtOneMinusWSquared,
    SqrtRegularized,
    UniformNoise,
    check_gamma,
    max_noise_halfwidth,
)
from .errors import ConfigError
from .fokker_planck import FullFP, PureDiffusion, PureDrift, fp_solve, initial_grid
from .grid import DensityGrid
from .kinetic import SimConfig, pool_histograms, simulate
from .stationary import StationarySpec, cell_averages

METRICS = ("L1", "Wasserstein1")
MIN_HALFWIDTH = 1e-8


def distance(a: DensityGrid, b: DensityGrid, metric="L1") -> float:
    """L1 of the densities or Wasserstein-1 of the two laws on a common grid."""
    if a.K != b.K:
        raise ValueError(f"grid mismatch: {a.K} vs {b.K} cells")
    if metric == "L1":
        return float(np.sum(np.abs(a.values - b.values)) * a.h)
    if metric == "Wasserstein1":
        return float(np.sum(np.abs(a.cdf() - b.cdf())) * a.h)
    raise ConfigError(f"unknown metric {metric!r}; choose from {METRICS}", field="metric")


def coarsen(grid: DensityGrid, K) -> DensityGrid:
    """Merge groups of cells of a grid whose size is a multiple of K."""
    if grid.K % K:
        raise ValueError(f"cannot coarsen {grid.K} cells to {K}")
    return DensityGrid(grid.values.reshape(K, -1).mean(axis=1), tau=grid.tau)


def limit_diffusion(D: RelevanceFunction) -> RelevanceFunction:
    """Diffusion function of the gamma -> 0 limit (drops the gamma regularization)."""
    return SqrtOneMinusWSquared() if isinstance(D, SqrtRegularized) else D


def closed_form_spec(D: RelevanceFunction, m, lam):
    D = limit_diffusion(D)
    if isinstance(D, (OneMinusWSquared, OneMinusAbs, SqrtOneMinusWSquared)):
        return StationarySpec(D.name, m, lam)
    return None


def diffusion_at(D: RelevanceFunction, gamma) -> RelevanceFunction:
    """Per-gamma kinetic diffusion: a regularized sqrt follows the gamma of the run."""
    return SqrtRegularized(D.p, gamma) if isinstance(D, SqrtRegularized) else D


def _bootstrap(histograms, target, metric, n_boot, rng):
    stack = np.array([h.values for h in histograms])
    R = stack.shape[0]
    if R < 2:
        return None
    vals = []
    for _ in range(n_boot):
        pick = rng.integers(0, R, R)
        vals.append(distance(DensityGrid(stack[pick].mean(axis=0)), target, metric))
    return np.array(vals)


def bootstrap_distance(histograms, target: DensityGrid, metric, n_boot, rng):
    """Standard error of the pooled-histogram distance, resampling replicas."""
    vals = _bootstrap(histograms, target, metric, n_boot, rng)
    return math.nan if vals is None else float(np.std(vals, ddof=1))


def noise_floor(histograms, metric, n_boot, rng):
    """Typical distance between the pooled histogram and a replica resample of itself."""
    vals = _bootstrap(histograms, pool_histograms(histograms), metric, n_boot, rng)
    return math.nan if vals is None else float(np.mean(vals))


@dataclass(frozen=True)
class SweepConfig:
    gammas: tuple
    lam: float
    D: RelevanceFunction
    n: int
    realizations: int
    tau_end: float
    P: RelevanceFunction = Constant()
    metric: str = "L1"
    bins: int = 100
    seed: int = 0
    initial: InitialCondition = InitialCondition()
    fp_refine: int = 4
    n_boot: int = 200

    def __post_init__(self):
        g = tuple(float(x) for x in self.gammas)
        object.__setattr__(self, "gammas", g)
        if not g:
            raise ConfigError("need at least one gamma", field="gammas")
        for x in g:
            check_gamma(x)
        if any(b >= a for a, b in zip(g, g[1:])):
            raise ConfigError("gamma values must be strictly decreasing", field="gammas")
        if not self.lam > 0:
            raise ConfigError("lambda must be positive", field="lambda")
        if self.metric not in METRICS:
            raise ConfigError(f"unknown metric {self.metric!r}; choose from {METRICS}", field="metric")
        if not self.tau_end > 0:
            raise ConfigError("tau_end must be positive", field="tau_end")
        if self.realizations < 1 or self.n < 2 or self.bins < 2:
            raise ConfigError("need realizations >= 1, N >= 2 and bins >= 2")


@dataclass
class SweepRow:
    gamma: float
    sigma2: float
    effective_lambda: float
    L1_to_fp: float
    L1_to_closed_form: float
    W1_to_fp: float
    rejected_fraction: float
    runtime_seconds: float
    distance: float
    distance_se: float
    stationary: bool
    checkpoint_distance: float
    skipped: str = ""


@dataclass
class SweepResult:
    rows: list
    monotone: bool
    metric: str
    target: str
    histograms: dict = field(default_factory=dict, repr=False)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows])


def effective_noise(D, gamma, lam):
    """Uniform noise of variance lam * gamma clipped to the admissible half-width."""
    nominal = UniformNoise.with_variance(lam * gamma)
    limit = max_noise_halfwidth(D, gamma)
    if nominal.halfwidth <= limit:
        return nominal
    return UniformNoise(limit)


def monotone_verdict(d, se):
    """True when d[i+1] <= d[i] + sqrt(se_i^2 + se_{i+1}^2) along the list."""
    d = np.asarray(d, float)
    se = np.nan_to_num(np.asarray(se, float))
    return bool(np.all(d[1:] <= d[:-1] + np.hypot(se[1:], se[:-1])))


def _fp_target(D, lam, m, sweep: SweepConfig):
    K = sweep.bins * sweep.fp_refine
    sol = fp_solve(FullFP(limit_diffusion(D), lam), initial_grid(sweep.initial, K),
                   tau_end=200.0, record_every=200.0, m=m, residual_tol=1e-9)
    return coarsen(sol.grid, sweep.bins)


def run_sweep(sweep: SweepConfig, threads=1, fp_target=True) -> SweepResult:
    """Run every gamma of the sweep; see the module docstring for the protocol.

    Distances for the verdict are taken to the closed form when it exists and
    to the Fokker-Planck profile otherwise.  Stationarity compares the pooled
    histogram at 0.9 of the horizon with the final one against twice the
    bootstrap noise floor.
    """
    rng = np.random.default_rng([sweep.seed, 0xB0075])
    rows = []
    hists = {}
    use_closed = closed_form_spec(sweep.D, 0.0, sweep.lam) is not None
    for gamma in sweep.gammas:
        t0 = time.perf_counter()
        D = diffusion_at(sweep.D, gamma)
        noise = effective_noise(D, gamma, sweep.lam)
        sigma2 = sweep.lam * gamma
        lam_eff = noise.variance / gamma
        if noise.halfwidth < MIN_HALFWIDTH:
            rows.append(SweepRow(gamma, sigma2, lam_eff, *([math.nan] * 4), 0.0, math.nan,
                                 math.nan, False, math.nan, skipped="noise support collapsed"))
            continue
        if abs(lam_eff - sweep.lam) > 1e-12 * sweep.lam:
            warnings.warn(f"gamma={gamma:g}: noise clipped, effective lambda {lam_eff:.6g}",
                          stacklevel=2)
        t_end = sweep.tau_end / gamma
        cfg = SimConfig(n=sweep.n, params=KineticParams(gamma, sigma2), P=sweep.P, D=D,
                        noise=noise, t_end=t_end, record_every=max(1.0, math.ceil(t_end / 100)),
                        histogram_bins=sweep.bins, realizations=sweep.realizations,
                        seed=sweep.seed, initial=sweep.initial)
        checkpoint = int(round(0.9 * cfg.sweeps))
        res = simulate(cfg, threads=threads, snapshot_times=(checkpoint,))
        pooled = res.pooled_histogram
        hists[gamma] = pooled
        m = float(np.mean(res.initial_means))

        fp = _fp_target(sweep.D, lam_eff, m, sweep) if fp_target else None
        spec = closed_form_spec(sweep.D, m, lam_eff)
        closed = cell_averages(spec, sweep.bins) if spec is not None else None
        target = closed if use_closed else fp

        snap = pool_histograms(res.snapshots[checkpoint])
        check_d = distance(snap, pooled, sweep.metric)
        floor = noise_floor(res.histograms, sweep.metric, sweep.n_boot, rng)
        if target is not None:
            d = distance(pooled, target, sweep.metric)
            se = bootstrap_distance(res.histograms, target, sweep.metric, sweep.n_boot, rng)
        else:
            d = se = math.nan
        rows.append(SweepRow(
            gamma, sigma2, lam_eff,
            distance(pooled, fp, "L1") if fp is not None else math.nan,
            distance(pooled, closed, "L1") if closed is not None else math.nan,
            distance(pooled, fp, "Wasserstein1") if fp is not None else math.nan,
            res.rejected_fraction, time.perf_counter() - t0, d, se,
            bool(check_d <= 2.0 * floor) if math.isfinite(floor) else False, check_d))
    done = [r for r in rows if not r.skipped]
    verdict = monotone_verdict([r.distance for r in done], [r.distance_se for r in done])
    return SweepResult(rows, verdict, sweep.metric, "closed_form" if use_closed else "fp", hists)


@dataclass
class RegimeReport:
    alpha: float
    gamma: float
    sigma2: float
    to_pure_diffusion: float
    to_pure_drift: float

    @property
    def closer(self):
        return "diffusion" if self.to_pure_diffusion < self.to_pure_drift else "drift"


def regime_run(gamma, alpha, lam, D: RelevanceFunction, n, realizations, kinetic_time,
               P: RelevanceFunction = Constant(), bins=100, seed=0,
               initial=InitialCondition("tilted", 0.2), threads=1) -> RegimeReport:
    """Compare the kinetic run with sigma^2 = lam * gamma^alpha to both degenerate limits.

    The pure diffusion equation runs in time sigma^2 t, the pure drift
    equation in time gamma t; both start from the same initial law.
    """
    sigma2 = lam * gamma**alpha
    noise = effective_noise(D, gamma, sigma2 / gamma)
    cfg = SimConfig(n=n, params=KineticParams(gamma, noise.variance), P=P, D=D, noise=noise,
                    t_end=kinetic_time, histogram_bins=bins, realizations=realizations,
                    seed=seed, initial=initial, record_every=max(1.0, math.ceil(kinetic_time / 50)))
    pooled = simulate(cfg, threads=threads).pooled_histogram
    K = 4 * bins
    g0 = initial_grid(initial, K)
    diff = fp_solve(PureDiffusion(limit_diffusion(D), 1.0), g0,
                    tau_end=noise.variance * cfg.sweeps, residual_tol=None)
    drift = fp_solve(PureDrift(P), g0, tau_end=gamma * cfg.sweeps, residual_tol=None)
    return RegimeReport(alpha, gamma, noise.variance,
                        distance(pooled, coarsen(diff.grid, bins)),
                        distance(pooled, coarsen(drift.grid, bins)))


def regularized_effective_lambda(p, gamma, samples=0, rng=None):
    """Effective lambda of uniform noise on the full admissible half-width a_gamma.

    Returns a_gamma^2 / (3 gamma); with ``samples`` > 0 the variance is instead
    measured from that many draws.
    """
    D = SqrtRegularized(p, gamma)
    noise = UniformNoise(max_noise_halfwidth(D, gamma))
    if samples:
        rng = np.random.default_rng(0) if rng is None else rng
        return float(np.var(noise.sample(rng, samples)) / gamma)
    return noise.variance / gamma
