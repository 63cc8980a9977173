"""Finite-volume solver for the limiting Fokker-Planck equations on [-1, 1].

All supported equations share the conservative form

    dg/dtau = d/dw J,   J = (lam/2) d/dw (D(|w|)^2 g) + s * P(|w|) * (w - m) * g

with zero flux J = 0 at w = +-1:

    FullFP         s = 1, P = 1, m conserved
    GeneralP       s = 1, P general, m(tau) taken from the grid each step
    PureDiffusion  no drift
    PureDrift      lam = 0, s = 1, m(tau) from the grid
    SznajdDrift    lam = 0, s = -1, P = 1 - w^2, m = 0

For lam > 0 the flux is exponentially fitted, which is second order for smooth
data and reproduces the exact stationary profile at cell centers.  Pure drift
equations use first-order upwinding.  Time stepping is explicit Euler.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .core import Constant, OneMinusWSquared, RelevanceFunction
from .errors import CFLViolation, ConfigError, NegativeDensityError
from .grid import DensityGrid, cell_centers
from .kinetic import MomentRecord, MomentSeries

NEG_TOL = 1e-10
SAFETY = 0.4
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)


@dataclass(frozen=True)
class FullFP:
    D: RelevanceFunction
    lam: float

    def __post_init__(self):
        _check_lam(self.lam)


@dataclass(frozen=True)
class GeneralP:
    D: RelevanceFunction
    lam: float
    P: RelevanceFunction

    def __post_init__(self):
        _check_lam(self.lam)


@dataclass(frozen=True)
class PureDiffusion:
    D: RelevanceFunction
    lam: float

    def __post_init__(self):
        _check_lam(self.lam)


@dataclass(frozen=True)
class PureDrift:
    P: RelevanceFunction


@dataclass(frozen=True)
class SznajdDrift:
    pass


def _check_lam(lam):
    if not lam > 0:
        raise ConfigError("lambda must be positive", field="lambda")


@dataclass
class _Operator:
    lam: float
    sign: float
    P: RelevanceFunction
    dynamic: bool
    xc: np.ndarray
    xf: np.ndarray
    h: float
    D2c: np.ndarray
    D2max: float
    Pf: np.ndarray
    I1: np.ndarray
    I0: np.ndarray
    fixed_m: float = None
    cp: np.ndarray = field(default=None, repr=False)
    cm: np.ndarray = field(default=None, repr=False)

    def coefficients(self, m):
        cp = np.empty(self.xf.size)
        cm = np.empty(self.xf.size)
        _kernels.fill_coefficients(cp, cm, m, self.lam, self.sign, self.I1, self.I0,
                                   self.D2c, self.Pf, self.xf, self.h)
        return cp, cm


def _compile(spec, K, m=None) -> _Operator:
    if isinstance(spec, FullFP):
        spec = GeneralP(spec.D, spec.lam, Constant())
    if isinstance(spec, GeneralP):
        lam, D, P, sign = spec.lam, spec.D, spec.P, 1.0
    elif isinstance(spec, PureDiffusion):
        lam, D, P, sign = spec.lam, spec.D, Constant(), 0.0
    elif isinstance(spec, PureDrift):
        lam, D, P, sign = 0.0, None, spec.P, 1.0
    elif isinstance(spec, SznajdDrift):
        lam, D, P, sign = 0.0, None, OneMinusWSquared(), -1.0
    else:
        raise ConfigError(f"unknown equation {spec!r}")

    h = 2.0 / K
    xc = cell_centers(K)
    xf = xc[:-1] + 0.5 * h
    n = K - 1
    I1 = np.zeros(n)
    I0 = np.zeros(n)
    if lam > 0:
        D2c = np.asarray(D(xc), dtype=float) ** 2
        if sign != 0.0:
            # Gauss-Legendre on [x_i, x_{i+1}] for the drift potential
            q = xf[:, None] + 0.5 * h * _GL_NODES[None, :]
            d2 = np.asarray(D(q), dtype=float) ** 2
            if np.any(d2 <= 0):
                raise ConfigError("the drift-diffusion solver needs D > 0 inside (-1, 1)", field="D")
            pq = np.asarray(P(q), dtype=float) * np.ones_like(q)
            wts = 0.5 * h * _GL_WEIGHTS
            I1 = (pq * q / d2) @ wts
            I0 = (pq / d2) @ wts
        D2max = float(np.max(D(np.linspace(-1, 1, 4001)) ** 2))
    else:
        D2c = np.zeros(K)
        D2max = 0.0
    Pf = np.asarray(P(xf), dtype=float) * np.ones(n)

    is_sznajd = isinstance(spec, SznajdDrift)
    dynamic = sign != 0.0 and not P.is_constant and not is_sznajd
    op = _Operator(lam, sign, P, dynamic, xc, xf, h, D2c, D2max, Pf, I1, I0)
    if not dynamic:
        op.fixed_m = 0.0 if is_sznajd or sign == 0.0 else m
    return op


def _grid_mean(values, op):
    return float(np.dot(op.xc, values) * op.h)


def _stable_dt(op, m):
    """SAFETY * min(h^2 / (lam max D^2), h / max |drift|), capped by the positivity limit."""
    h = op.h
    limits = []
    if op.lam > 0 and op.D2max > 0:
        limits.append(h * h / (op.lam * op.D2max))
    if op.sign != 0.0:
        if op.dynamic:
            bmax = float(np.max(np.abs(op.P(op.xc)))) * 2.0
        else:
            bmax = float(np.max(np.abs(op.Pf * (op.xf - m))))
        if bmax > 0:
            limits.append(h / bmax)
    dt = SAFETY * min(limits) if limits else math.inf
    cp, cm = op.coefficients(m)
    diag = np.zeros(op.xc.size)
    diag[:-1] += cm
    diag[1:] += cp
    dmax = float(diag.max())
    if dmax > 0:
        dt = min(dt, (0.5 if op.dynamic else 0.95) * h / dmax)
    return dt


def stable_time_step(grid: DensityGrid, spec, m=None) -> float:
    """Largest explicit step the solver accepts for this grid and equation."""
    op = _compile(spec, grid.K, m)
    mm = _operator_m(op, grid.values, m)
    return _stable_dt(op, mm)


def _operator_m(op, values, m):
    if op.dynamic:
        return _grid_mean(values, op)
    if op.fixed_m is not None:
        return op.fixed_m
    return _grid_mean(values, op) if m is None else float(m)


def _advance(op, g, m, dt, nsteps):
    if op.dynamic:
        status, done = _kernels.advance_dynamic(g, op.xc, op.h, dt, nsteps, NEG_TOL, op.lam,
                                                op.sign, op.I1, op.I0, op.D2c, op.Pf, op.xf)
    else:
        if op.cp is None:
            op.cp, op.cm = op.coefficients(m)
        status, done = _kernels.advance_fixed(g, op.cp, op.cm, op.h, dt, nsteps, NEG_TOL)
    if status != 0:
        raise NegativeDensityError(
            f"density fell below -{NEG_TOL:g} after {done} steps of size {dt:.3e}")


def fp_step(grid: DensityGrid, spec, dt, m=None) -> DensityGrid:
    """One explicit conservative step of size ``dt``.

    For equations with conserved mean, ``m`` defaults to the grid mean.
    """
    op = _compile(spec, grid.K, m)
    mm = _operator_m(op, grid.values, m)
    limit = _stable_dt(op, mm)
    if dt > limit * (1 + 1e-12):
        raise CFLViolation(f"time step {dt:.3e} exceeds stability bound {limit:.3e}")
    g = grid.values.copy()
    _advance(op, g, mm, float(dt), 1)
    return DensityGrid(g, tau=grid.tau + dt)


@dataclass
class FPSolution:
    grid: DensityGrid
    series: MomentSeries
    converged: bool
    tau: float
    steps: int
    dt: float
    residual: float


def _moment_record(values, op, tau):
    m = _grid_mean(values, op)
    m2 = float(np.dot(op.xc**2, values) * op.h)
    c = float(np.dot((op.xc - m) ** 2, values) * op.h)
    return MomentRecord(tau, m, m2, c, 0.0)


def fp_solve(spec, initial: DensityGrid, tau_end, record_every=None, m=None,
             residual_tol=1e-9, check_every=1000) -> FPSolution:
    """Integrate to ``tau_end``, recording moments every ``record_every``.

    Stops early once max |dg/dtau| over ``check_every`` steps drops below
    ``residual_tol`` (pass None to always run to ``tau_end``).
    """
    if not tau_end > 0:
        raise ConfigError("tau_end must be positive", field="tau_end")
    if record_every is None:
        record_every = tau_end / 50.0
    if not record_every > 0:
        raise ConfigError("record_every must be positive", field="record_every")
    op = _compile(spec, initial.K, m)
    g = initial.values.copy()
    mm = _operator_m(op, g, m)
    dt_max = _stable_dt(op, mm)
    tau0 = initial.tau
    targets = list(np.arange(1, int(math.floor(tau_end / record_every + 1e-9)) + 1) * record_every)
    if not targets or targets[-1] < tau_end - 1e-12:
        targets.append(tau_end)
    series = MomentSeries([_moment_record(g, op, tau0)])
    tau = 0.0
    steps = 0
    residual = math.inf
    converged = False
    dt = dt_max
    for target in targets:
        n = max(1, int(math.ceil((target - tau) / dt_max - 1e-9)))
        dt = (target - tau) / n
        left = n
        while left > 0:
            chunk = min(check_every, left)
            before = g.copy() if residual_tol is not None else None
            _advance(op, g, mm, dt, chunk)
            left -= chunk
            steps += chunk
            tau += chunk * dt
            if residual_tol is not None:
                residual = float(np.max(np.abs(g - before))) / (chunk * dt)
                if residual < residual_tol:
                    converged = True
                    break
        series.append(_moment_record(g, op, tau0 + tau))
        if converged:
            break
    return FPSolution(DensityGrid(g, tau=tau0 + tau), series, converged, tau0 + tau, steps, dt,
                      residual)


def mean_evolution_generalP(grid: DensityGrid, P: RelevanceFunction) -> float:
    """dm/dtau = m * int P g - int w P g, by the midpoint rule on the grid."""
    x = grid.centers
    g = grid.values
    h = grid.h
    p = np.asarray(P(x)) * np.ones_like(x)
    m = float(np.dot(x, g) * h)
    return m * float(np.dot(p, g) * h) - float(np.dot(x * p, g) * h)


@dataclass
class MomentTrajectory:
    tau: np.ndarray
    mean: np.ndarray
    second_moment: np.ndarray


def closed_moment_odes(lam, m0, M2_0, tau_end=None, times=None, dt=1e-3) -> MomentTrajectory:
    """Moments of the equation with D = sqrt(1 - w^2) and P = 1.

    Testing the equation against w and w^2 with zero boundary flux gives
    dm/dtau = 0 and dM2/dtau = lam (1 - M2) - 2 (M2 - m^2); integrated with
    classical RK4 and reported at ``times`` (or on a uniform grid up to ``tau_end``).
    """
    if not lam > 0:
        raise ConfigError("lambda must be positive", field="lambda")
    if not (abs(m0) <= 1 and m0 * m0 <= M2_0 + 1e-15 and M2_0 <= 1 + 1e-15):
        raise ConfigError("need m0^2 <= M2_0 <= 1", field="M2_0")
    if times is None:
        if tau_end is None:
            raise ConfigError("give tau_end or times")
        n = max(1, int(math.ceil(tau_end / dt)))
        times = np.linspace(0.0, tau_end, n + 1)
    times = np.asarray(times, dtype=float)

    def rhs(y):
        m, M2 = y
        return np.array([0.0, lam * (1.0 - M2) - 2.0 * (M2 - m * m)])

    y = np.array([float(m0), float(M2_0)])
    out = np.empty((times.size, 2))
    t = 0.0
    for k, target in enumerate(times):
        n = int(math.ceil((target - t) / dt - 1e-9))
        if n > 0:
            hstep = (target - t) / n
            for _ in range(n):
                k1 = rhs(y)
                k2 = rhs(y + 0.5 * hstep * k1)
                k3 = rhs(y + 0.5 * hstep * k2)
                k4 = rhs(y + hstep * k3)
                y = y + hstep / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            t = target
        out[k] = y
    return MomentTrajectory(times, out[:, 0], out[:, 1])


def initial_grid(initial, K) -> DensityGrid:
    """Exact cell averages of an ``InitialCondition`` law."""
    return DensityGrid.from_cdf(initial.cdf, K)
