"""Cell-averaged densities on a uniform partition of [-1, 1]."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MASS_TOL = 1e-10


def cell_edges(K):
    return np.linspace(-1.0, 1.0, K + 1)


def cell_centers(K):
    h = 2.0 / K
    return -1.0 + h * (np.arange(K) + 0.5)


@dataclass
class DensityGrid:
    """K nonnegative cell averages over [-1, 1] with unit mass.

    ``tau`` is the (scaled) time the profile belongs to.
    """

    values: np.ndarray
    tau: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size < 2:
            raise ValueError("a density grid needs at least two cells")
        if np.any(self.values < 0) or not np.all(np.isfinite(self.values)):
            raise ValueError("density values must be finite and nonnegative")
        if abs(self.mass - 1.0) > MASS_TOL:
            raise ValueError(f"density mass {self.mass!r} differs from 1")

    @property
    def K(self):
        return self.values.size

    @property
    def h(self):
        return 2.0 / self.K

    @property
    def centers(self):
        return cell_centers(self.K)

    @property
    def edges(self):
        return cell_edges(self.K)

    @property
    def mass(self):
        return float(self.values.sum() * self.h)

    @property
    def mean(self):
        return float(np.dot(self.centers, self.values) * self.h)

    @property
    def second_moment(self):
        return float(np.dot(self.centers**2, self.values) * self.h)

    def cdf(self):
        """Cumulative mass at the right edge of every cell."""
        return np.cumsum(self.values) * self.h

    @classmethod
    def from_masses(cls, masses, tau=0.0):
        """Build from per-cell probabilities; rescaled to unit total mass."""
        masses = np.asarray(masses, dtype=float)
        K = masses.size
        return cls(masses / masses.sum() * (K / 2.0), tau=tau)

    @classmethod
    def uniform(cls, K):
        return cls(np.full(K, 0.5))

    @classmethod
    def from_cdf(cls, cdf, K, tau=0.0):
        """Exact cell averages of a law given by its cumulative distribution function."""
        F = np.asarray(cdf(cell_edges(K)), dtype=float)
        return cls.from_masses(np.maximum(np.diff(F), 0.0), tau=tau)

    @classmethod
    def point_mass(cls, w, K):
        """All mass in the cell containing ``w`` (right cell on interior edges)."""
        idx = min(int(np.floor((w + 1.0) * K / 2.0)), K - 1)
        masses = np.zeros(K)
        masses[idx] = 1.0
        return cls.from_masses(masses)
