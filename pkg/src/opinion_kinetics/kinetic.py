"""Ensemble Monte Carlo for the homogeneous Boltzmann equation of opinion exchange.

One sweep shuffles the ensemble, reads off N/2 disjoint pairs and lets each
pair interact once, so every agent has on average one interaction per unit
of kinetic time ``t``.  Proposals that would leave [-1, 1] are rejected and
leave both partners unchanged.

Replicas draw from counter-based Philox streams keyed by ``(seed, replica)``,
which makes every result independent of how replicas are scheduled.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import (
    Constant,
    InitialCondition,
    KineticParams,
    NoiseModel,
    OneMinusAbs,
    RelevanceFunction,
    check_opinions,
    default_noise,
    interact,
    is_admissible,
)
from .errors import ConfigError
from .grid import DensityGrid

_U64 = 1 << 64


def replica_rng(seed, replica=0) -> np.random.Generator:
    """Philox4x64 stream with key (seed, replica) and counter starting at zero."""
    if not (0 <= seed < _U64) or not (0 <= replica < _U64):
        raise ConfigError("seed and replica index must be unsigned 64-bit integers", field="seed")
    return np.random.Generator(np.random.Philox(key=int(seed) + (int(replica) << 64)))


@dataclass
class Ensemble:
    """N opinions at kinetic time ``time``; mutated in place by ``mc_step``."""

    opinions: np.ndarray
    time: float = 0.0
    rng_seed: int = 0
    proposed: int = 0
    rejected: int = 0

    def __post_init__(self):
        self.opinions = check_opinions(np.array(self.opinions, dtype=float))
        if self.opinions.ndim != 1 or self.opinions.size < 2:
            raise ValueError("an ensemble needs at least two agents")

    @property
    def n(self):
        return self.opinions.size


@dataclass(frozen=True)
class MomentRecord:
    t: float
    mean: float
    second_moment: float
    c_f: float
    rejected_fraction: float = 0.0


@dataclass
class MomentSeries:
    records: list = field(default_factory=list)

    def append(self, rec: MomentRecord):
        self.records.append(rec)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records])

    @property
    def t(self):
        return self.column("t")

    @property
    def mean(self):
        return self.column("mean")

    @property
    def second_moment(self):
        return self.column("second_moment")

    @property
    def c_f(self):
        return self.column("c_f")


@dataclass(frozen=True)
class SimConfig:
    n: int
    params: KineticParams
    P: RelevanceFunction
    D: RelevanceFunction
    noise: NoiseModel
    t_end: float
    record_every: float = 1.0
    histogram_bins: int = 100
    realizations: int = 1
    seed: int = 0
    initial: InitialCondition = InitialCondition()

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ConfigError("N must be an integer >= 2", field="N")
        if not self.t_end > 0:
            raise ConfigError("t_end must be positive", field="t_end")
        if not self.record_every >= 1:
            raise ConfigError("record_every must be at least one sweep", field="record_every")
        if int(self.histogram_bins) != self.histogram_bins or self.histogram_bins < 2:
            raise ConfigError("histogram_bins must be an integer >= 2", field="bins")
        if int(self.realizations) != self.realizations or self.realizations < 1:
            raise ConfigError("realizations must be a positive integer", field="realizations")
        if not (0 <= self.seed < _U64):
            raise ConfigError("seed must be an unsigned 64-bit integer", field="seed")

    @property
    def sweeps(self):
        return int(math.ceil(self.t_end))

    @property
    def record_stride(self):
        return int(round(self.record_every))


def moments(opinions):
    """(mean, second moment, spread) with the spread computed in two passes."""
    w = np.asarray(opinions)
    m = float(w.mean())
    c = float(np.mean((w - m) ** 2))
    return m, c + m * m, c


def mc_step(ensemble: Ensemble, config: SimConfig, rng: np.random.Generator) -> Ensemble:
    """One sweep of N/2 disjoint random pairs; advances ``time`` by one."""
    w = ensemble.opinions
    n = w.size
    half = n // 2
    perm = rng.permutation(n)
    i = perm[:half]
    j = perm[half:2 * half]
    eta = config.noise.sample(rng, half)
    eta_star = config.noise.sample(rng, half)
    w_new, ws_new = interact(w[i], w[j], config.params, config.P, config.D, eta, eta_star)
    ok = is_admissible(w_new, ws_new)
    w[i[ok]] = w_new[ok]
    w[j[ok]] = ws_new[ok]
    ensemble.proposed += half
    ensemble.rejected += int(half - np.count_nonzero(ok))
    ensemble.time += 1.0
    assert np.max(np.abs(w)) <= 1.0
    return ensemble


def estimate_density(opinions, bins) -> DensityGrid:
    """Normalized histogram on uniform cells over [-1, 1].

    A value on an interior cell edge belongs to the right cell; w = 1 to the last cell.
    """
    if int(bins) != bins or bins < 2:
        raise ConfigError("bins must be an integer >= 2", field="bins")
    counts, _ = np.histogram(np.asarray(opinions), bins=int(bins), range=(-1.0, 1.0))
    return DensityGrid.from_masses(counts.astype(float))


@dataclass
class ReplicaResult:
    series: MomentSeries
    histogram: DensityGrid
    initial_mean: float
    snapshots: dict
    proposed: int = 0
    rejected: int = 0


@dataclass
class SimulationResult:
    series: list
    pooled_series: MomentSeries
    histograms: list
    pooled_histogram: DensityGrid
    initial_means: list
    snapshots: dict
    proposed: int = 0
    rejected: int = 0

    @property
    def rejected_fraction(self):
        """Rejected share of all proposals over the whole run, all replicas."""
        return self.rejected / self.proposed if self.proposed else 0.0


def _record(ens, last_counts):
    m, m2, c = moments(ens.opinions)
    dp = ens.proposed - last_counts[0]
    dr = ens.rejected - last_counts[1]
    return MomentRecord(ens.time, m, m2, c, dr / dp if dp else 0.0)


def run_replica(config: SimConfig, replica: int, snapshot_times=()) -> ReplicaResult:
    rng = replica_rng(config.seed, replica)
    ens = Ensemble(config.initial.sample(rng, config.n), rng_seed=config.seed)
    series = MomentSeries()
    series.append(_record(ens, (0, 0)))
    counts = (0, 0)
    wanted = {int(round(t)) for t in snapshot_times}
    snapshots = {}
    if 0 in wanted:
        snapshots[0] = estimate_density(ens.opinions, config.histogram_bins)
    stride = config.record_stride
    for k in range(1, config.sweeps + 1):
        mc_step(ens, config, rng)
        if k % stride == 0 or k == config.sweeps:
            series.append(_record(ens, counts))
            counts = (ens.proposed, ens.rejected)
        if k in wanted:
            snapshots[k] = estimate_density(ens.opinions, config.histogram_bins)
    hist = estimate_density(ens.opinions, config.histogram_bins)
    return ReplicaResult(series, hist, series[0].mean, snapshots, ens.proposed, ens.rejected)


def pool_histograms(grids) -> DensityGrid:
    return DensityGrid(np.mean([g.values for g in grids], axis=0))


def pool_series(all_series) -> MomentSeries:
    """Moments of the union of equally sized replicas, record by record."""
    pooled = MomentSeries()
    for recs in zip(*[s.records for s in all_series]):
        means = np.array([r.mean for r in recs])
        m = float(means.mean())
        within = float(np.mean([r.c_f for r in recs]))
        c = within + float(np.mean((means - m) ** 2))
        pooled.append(MomentRecord(recs[0].t, m, c + m * m, c,
                                   float(np.mean([r.rejected_fraction for r in recs]))))
    return pooled


def simulate(config: SimConfig, threads=1, snapshot_times=()) -> SimulationResult:
    """Run ``config.realizations`` independent replicas and pool them.

    Output depends only on ``config`` (including its seed), never on ``threads``.
    """
    def job(r):
        return run_replica(config, r, snapshot_times)

    if threads > 1 and config.realizations > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            results = list(pool.map(job, range(config.realizations)))
    else:
        results = [job(r) for r in range(config.realizations)]
    series = [r.series for r in results]
    hists = [r.histogram for r in results]
    snaps = {t: [r.snapshots[t] for r in results] for t in results[0].snapshots}
    return SimulationResult(series, pool_series(series), hists, pool_histograms(hists),
                            [r.initial_mean for r in results], snaps,
                            sum(r.proposed for r in results), sum(r.rejected for r in results))


def sweep_contraction_factor(gamma, n):
    """Expected factor applied to the spread by one noise-free sweep with P = 1.

    Pairing without replacement gives E[w w_star] = (N m^2 - M2) / (N - 1),
    hence C -> (1 - 2 gamma (1 - gamma) N / (N - 1)) C.
    """
    return 1.0 - 2.0 * gamma * (1.0 - gamma) * n / (n - 1.0)


@dataclass(frozen=True)
class MomentLawFit:
    fitted_rate: float
    predicted_rate: float
    continuum_rate: float
    relative_deviation: float
    points_used: int


def moment_law_check(series: MomentSeries, config: SimConfig, floor=1e-24) -> MomentLawFit:
    """Least-squares exponential rate of the spread against the derived decay.

    ``fitted_rate`` is the slope of log C_f(t).  ``predicted_rate`` is
    log of the per-sweep contraction factor of the noise-free rule, and
    ``continuum_rate`` is -2 gamma (1 - gamma), the rate of the
    continuous-time equation.  With noise the fit measures the net rate.
    """
    if len(series) < 10:
        raise ValueError(f"moment series too short: {len(series)} records, need at least 10")
    if not config.P.is_constant:
        raise ValueError("the decay law is only closed for a constant compromise function")
    t = series.t
    c = series.c_f
    keep = np.isfinite(c) & (c > floor)
    if keep.sum() < 3:
        raise ValueError("fewer than three records above the spread floor")
    slope = float(np.polyfit(t[keep], np.log(c[keep]), 1)[0])
    gamma = config.params.gamma
    predicted = math.log(sweep_contraction_factor(gamma, config.n))
    rel = abs(slope - predicted) / abs(predicted) if predicted != 0 else abs(slope)
    return MomentLawFit(slope, predicted, -2.0 * gamma * (1.0 - gamma), rel, int(keep.sum()))


def make_config(n, gamma, sigma2=0.0, P=None, D=None, noise=None, **kw) -> SimConfig:
    """Convenience constructor with the default uniform noise law."""
    params = KineticParams(gamma, sigma2)
    P = Constant() if P is None else P
    D = OneMinusAbs() if D is None else D
    if noise is None:
        noise = default_noise(params, D)
    return SimConfig(n=n, params=params, P=P, D=D, noise=noise, **kw)
