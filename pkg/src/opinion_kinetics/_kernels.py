"""Compiled inner loops of the finite-volume Fokker-Planck solver.

Interface fluxes have the two-point form

    J[i+1/2] = cp[i] * g[i+1] - cm[i] * g[i]

and each cell is updated with g[i] += dt/h * (J[i+1/2] - J[i-1/2]),
J = 0 on both boundaries.  Status codes: 0 ok, 1 negative cell beyond tolerance.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def bernoulli(x):
    """x / (exp(x) - 1), evaluated without overflow or cancellation."""
    if abs(x) < 1e-8:
        return 1.0 - 0.5 * x
    if x > 700.0:
        return x * math.exp(-x)
    return x / math.expm1(x)


@njit(cache=True)
def _update(g, J, cp, cm, dt_h, neg_tol):
    K = g.size
    for i in range(K - 1):
        J[i + 1] = cp[i] * g[i + 1] - cm[i] * g[i]
    clipped = False
    for i in range(K):
        g[i] += dt_h * (J[i + 1] - J[i])
        if g[i] < 0.0:
            if g[i] < -neg_tol:
                return 1, clipped
            g[i] = 0.0
            clipped = True
    return 0, clipped


@njit(cache=True)
def advance_fixed(g, cp, cm, h, dt, nsteps, neg_tol):
    """Linear update with precomputed interface coefficients."""
    K = g.size
    J = np.zeros(K + 1)
    dt_h = dt / h
    for step in range(nsteps):
        status, clipped = _update(g, J, cp, cm, dt_h, neg_tol)
        if status != 0:
            return status, step
        if clipped:
            g /= g.sum() * h
    return 0, nsteps


@njit(cache=True)
def fill_coefficients(cp, cm, m, lam, sign, I1, I0, D2c, Pf, xf, h):
    """Interface coefficients for the drift field sign * P(w) * (w - m).

    With lam > 0 the flux is exponentially fitted (Scharfetter-Gummel): the
    potential jump across the interface is (2/lam) * sign * (I1 - m * I0), with
    I1, I0 the integrals of P w / D^2 and P / D^2 between neighbouring centers.
    With lam == 0 the drift is upwinded.
    """
    n = cp.size
    if lam > 0.0:
        c = 0.5 * lam / h
        for i in range(n):
            dphi = 2.0 / lam * sign * (I1[i] - m * I0[i])
            cp[i] = c * bernoulli(-dphi) * D2c[i + 1]
            cm[i] = c * bernoulli(dphi) * D2c[i]
    else:
        for i in range(n):
            b = sign * Pf[i] * (xf[i] - m)
            cp[i] = b if b > 0.0 else 0.0
            cm[i] = -b if b < 0.0 else 0.0


@njit(cache=True)
def advance_dynamic(g, xc, h, dt, nsteps, neg_tol, lam, sign, I1, I0, D2c, Pf, xf):
    """Update whose drift centre m is recomputed from the grid before each step."""
    K = g.size
    J = np.zeros(K + 1)
    cp = np.empty(K - 1)
    cm = np.empty(K - 1)
    dt_h = dt / h
    for step in range(nsteps):
        m = 0.0
        for i in range(K):
            m += xc[i] * g[i]
        m *= h
        fill_coefficients(cp, cm, m, lam, sign, I1, I0, D2c, Pf, xf, h)
        status, clipped = _update(g, J, cp, cm, dt_h, neg_tol)
        if status != 0:
            return status, step
        if clipped:
            g /= g.sum() * h
    return 0, nsteps
