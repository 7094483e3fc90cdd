"""
Discrete densities and potentials, the entropy functional ``J`` and the
Fisher-type functionals ``F_p``.

``J(rho) = int rho log rho + int rho V`` is the energy whose Wasserstein
gradient flow is the Fokker-Planck equation; its unique minimiser is the
Gibbs density ``exp(-V) / Z``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import InvalidDensity
from .grid import Grid1D, GridFunction, diff1, diff2

DEFAULT_FLOOR = 1e-10
MASS_TOL = 1e-10


@dataclass(frozen=True)
class Density:
    """Probability density sampled on a grid, bounded below by ``floor``."""

    f: GridFunction
    floor: float = DEFAULT_FLOOR

    def __post_init__(self):
        if not self.floor > 0:
            raise InvalidDensity(f"floor must be positive, got {self.floor}")
        v = self.f.values
        vmin = v.min()
        if vmin < self.floor:
            raise InvalidDensity(f"density value {vmin:.3e} below floor {self.floor:.3e}")
        mass = self.f.grid.h * v.sum()
        if abs(mass - 1.0) > MASS_TOL:
            raise InvalidDensity(f"density mass {mass!r} differs from 1")

    @classmethod
    def from_values(cls, grid: Grid1D, values, floor: float = DEFAULT_FLOOR,
                    normalize: bool = True) -> "Density":
        """Build a density; with ``normalize`` the values are scaled to unit mass."""
        v = np.asarray(values, dtype=float)
        if normalize:
            v = v / (grid.h * v.sum())
        return cls(GridFunction(grid, v), floor)

    @classmethod
    def floored(cls, grid: Grid1D, values, floor: float = DEFAULT_FLOOR) -> "Density":
        """Clip at ``floor`` and renormalise; used for nominally compactly supported data."""
        v = np.maximum(np.asarray(values, dtype=float), floor)
        v = v / (grid.h * v.sum())
        # renormalising can push a clipped value a hair below the floor
        return cls(GridFunction(grid, np.maximum(v, floor)), floor)

    @property
    def grid(self) -> Grid1D:
        return self.f.grid

    @property
    def values(self) -> np.ndarray:
        return self.f.values


@dataclass(frozen=True)
class Potential:
    """Confining potential ``V`` with its Lipschitz constant and ``lam <= V''``.

    ``fn`` optionally supplies ``V`` and its derivatives at arbitrary points as
    ``fn(x, nu)``; tabulated potentials are evaluated through a cubic spline.
    """

    V: GridFunction
    lip: float
    lam: float
    fn: Optional[Callable] = field(default=None, compare=False, repr=False)

    @classmethod
    def from_function(cls, grid: Grid1D, fn: Callable) -> "Potential":
        """``fn(x, nu)`` returns the ``nu``-th derivative of V at ``x``."""
        V = GridFunction(grid, fn(grid.nodes, 0) * np.ones(grid.n))
        xs = np.linspace(grid.a, grid.b, 16 * grid.n + 1)
        lip = float(np.max(np.abs(fn(xs, 1) * np.ones_like(xs))))
        lam = float(np.min(fn(xs, 2) * np.ones_like(xs)))
        return cls(V, lip, lam, fn)

    @classmethod
    def from_values(cls, grid: Grid1D, values) -> "Potential":
        v = np.asarray(values, dtype=float)
        spline = CubicSpline(grid.nodes, v)

        def fn(x, nu=0):
            return spline(x, nu)

        xs = np.linspace(grid.a, grid.b, 16 * grid.n + 1)
        lip = max(float(np.max(np.abs(spline(xs, 1)))), float(np.max(np.abs(diff1(v, grid.h)))))
        lam = min(float(np.min(spline(xs, 2))), float(np.min(diff2(v, grid.h))))
        return cls(GridFunction(grid, v), lip, lam, fn)

    @property
    def grid(self) -> Grid1D:
        return self.V.grid

    @property
    def values(self) -> np.ndarray:
        return self.V.values

    def evaluate(self, x, nu: int = 0) -> np.ndarray:
        """V (``nu=0``), V' or V'' at arbitrary points of ``[a, b]``."""
        x = np.asarray(x, dtype=float)
        if self.fn is None:
            return CubicSpline(self.grid.nodes, self.values)(x, nu)
        return np.asarray(self.fn(x, nu), dtype=float) * np.ones_like(x)


def entropy_J(rho: Density, V: Potential) -> float:
    """``int rho log rho + int rho V`` by the midpoint rule."""
    r = rho.values
    if r.min() < rho.floor:
        raise InvalidDensity("density below floor; J would be +inf")
    return float(rho.grid.h * np.sum(r * np.log(r) + r * V.values))


def fisher_Fp(rho: Density, V: Potential, p: float = 2.0) -> float:
    r"""Generalised Fisher information

    .. math:: F_p(\rho) = \frac1p \int |\rho'/\rho + V'|^p \rho.
    """
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    h = rho.grid.h
    r = rho.values
    w = diff1(r, h) / r + diff1(V.values, h)
    return float(h * np.sum(np.abs(w) ** p * r) / p)


def gibbs_density(V: Potential, floor: float = DEFAULT_FLOOR) -> Density:
    """``exp(-V) / Z`` with ``Z`` the midpoint integral of ``exp(-V)``."""
    v = V.values
    w = np.exp(-(v - v.min()))
    return Density.from_values(V.grid, w, floor=floor)
