"""Interaction potentials over the internal (shape) coordinates.

Every model maps internal coordinates x = (x1, x2, x3) to a total energy
and its analytic gradient dU/dx_i.  The built-in pairwise models go through
the physical pair separations (d23, d13, d12), whose squares are linear in
(x1^2, x2^2, x3^2), so the chain rule stays closed-form.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod

import numpy as np

from .kinematics import Masses, reduced_mass

__all__ = [
    "PotentialModel",
    "FreePotential",
    "CallablePotential",
    "PairwisePotential",
    "GravityPotential",
    "MorsePotential",
    "depth_at_reference",
]


class PotentialModel(ABC):
    """Potential energy U(x) on the internal space and its gradient."""

    @abstractmethod
    def evaluate(self, x) -> float:
        """Total potential energy at internal coordinates x = (x1, x2, x3)."""

    @abstractmethod
    def gradient(self, x) -> np.ndarray:
        """Analytic 3-vector dU/dx_i at x."""


class FreePotential(PotentialModel):
    """U identically zero (free motion)."""

    def evaluate(self, x):
        return 0.0

    def gradient(self, x):
        return np.zeros(3)


class CallablePotential(PotentialModel):
    """Wrap plain callables f(x) and grad(x) as a potential model."""

    def __init__(self, f, grad):
        self._f = f
        self._grad = grad

    def evaluate(self, x):
        return float(self._f(np.asarray(x, dtype=float)))

    def gradient(self, x):
        return np.asarray(self._grad(np.asarray(x, dtype=float)), dtype=float)


class PairwisePotential(PotentialModel):
    """Sum of pair terms v(d) over the three physical separations.

    Subclasses supply pair_energy(d, i, j) and pair_energy_dd(d, i, j) for
    the pair (i, j); the geometry and chain rule live here.  Pair order is
    (2,3), (1,3), (1,2) matching kinematics.pair_distances.
    """

    _PAIRS = ((2, 3), (1, 3), (1, 2))

    def __init__(self, masses: Masses):
        self.masses = masses
        mu0 = reduced_mass(masses)
        m23 = masses.m2 + masses.m3
        c1 = math.sqrt(mu0 * m23 / (masses.m2 * masses.m3))
        c2 = math.sqrt(mu0 * masses.total / (masses.m1 * m23))
        k2 = masses.m2 / m23
        k3 = masses.m3 / m23
        # d_p^2 = sum_i C[p, i] * x_i^2 for p in (23, 13, 12)
        self._C = np.array(
            [
                [c1 * c1, 0.0, 0.0],
                [(k2 * c1) ** 2 + k2 * c1 * c2, c2 * c2 + k2 * c1 * c2, -k2 * c1 * c2],
                [(k3 * c1) ** 2 - k3 * c1 * c2, c2 * c2 - k3 * c1 * c2, k3 * c1 * c2],
            ]
        )

    @abstractmethod
    def pair_energy(self, d: float, i: int, j: int) -> float:
        """Energy of the (i, j) pair at separation d."""

    @abstractmethod
    def pair_energy_dd(self, d: float, i: int, j: int) -> float:
        """Derivative of the pair energy with respect to d."""

    def _distances(self, x):
        xsq = np.asarray(x, dtype=float) ** 2
        return np.sqrt(np.maximum(self._C @ xsq, 0.0))

    def evaluate(self, x):
        d = self._distances(x)
        return float(sum(self.pair_energy(d[p], *ij) for p, ij in enumerate(self._PAIRS)))

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        d = self._distances(x)
        grad = np.zeros(3)
        for p, ij in enumerate(self._PAIRS):
            if d[p] <= 0.0:
                continue
            # dU/dx_i = v'(d) * (C[p,i] * x_i) / d
            grad += self.pair_energy_dd(d[p], *ij) * self._C[p] * x / d[p]
        return grad


class GravityPotential(PairwisePotential):
    """Softened pairwise gravity, v = -G*mi*mj / sqrt(d^2 + delta^2)."""

    def __init__(self, masses: Masses, G: float = 1.0, softening: float = 0.0):
        super().__init__(masses)
        self.G = G
        self.softening = softening
        self._m = {1: masses.m1, 2: masses.m2, 3: masses.m3}

    def pair_energy(self, d, i, j):
        return -self.G * self._m[i] * self._m[j] / math.sqrt(d * d + self.softening**2)

    def pair_energy_dd(self, d, i, j):
        den = (d * d + self.softening**2) ** 1.5
        return self.G * self._m[i] * self._m[j] * d / den


class MorsePotential(PairwisePotential):
    """Pairwise Morse wells, v = D*[(1 - exp(-alpha*(d - d0)))^2 - 1]."""

    def __init__(self, masses: Masses, D: float = 1.0, alpha: float = 1.0, d0: float = 1.0):
        super().__init__(masses)
        self.D = D
        self.alpha = alpha
        self.d0 = d0

    def pair_energy(self, d, i, j):
        e = math.exp(-self.alpha * (d - self.d0))
        return self.D * ((1.0 - e) ** 2 - 1.0)

    def pair_energy_dd(self, d, i, j):
        e = math.exp(-self.alpha * (d - self.d0))
        return 2.0 * self.D * self.alpha * e * (1.0 - e)


def depth_at_reference(potential: PotentialModel, x_ref) -> float:
    """|U| at a reference configuration, a practical stand-in for the
    (possibly unbounded) maximal potential depth used to normalize g."""
    return abs(potential.evaluate(x_ref))
