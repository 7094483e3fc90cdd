"""
Uniform cell-centred 1-D mesh with midpoint quadrature, finite differences
and discrete Sobolev norms.

Every other module samples its fields on a :class:`Grid1D`; values are
attached to cell centres ``x_i = a + (i + 1/2) h``.

Example
-------
>>> g = Grid1D(0.0, 1.0, 64)
>>> integrate(GridFunction.from_function(g, lambda x: x))
0.5
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class Grid1D:
    """Uniform partition of ``[a, b]`` into ``n`` cells."""

    a: float
    b: float
    n: int

    def __post_init__(self):
        if not self.b > self.a:
            raise ValueError(f"need b > a, got a={self.a}, b={self.b}")
        if self.n < 8:
            raise ValueError(f"need n >= 8 cells, got {self.n}")

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.n

    @cached_property
    def nodes(self) -> np.ndarray:
        """Cell centres."""
        return self.a + (np.arange(self.n) + 0.5) * self.h

    @cached_property
    def edges(self) -> np.ndarray:
        """The ``n + 1`` cell interfaces, endpoints included exactly."""
        e = self.a + np.arange(self.n + 1) * self.h
        e[-1] = self.b
        return e

    @property
    def length(self) -> float:
        return self.b - self.a


@dataclass(frozen=True)
class GridFunction:
    """Real samples at the cell centres of ``grid``."""

    grid: Grid1D
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function has non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: Grid1D, f) -> "GridFunction":
        return cls(grid, np.asarray(f(grid.nodes), dtype=float) * np.ones(grid.n))

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.grid, values)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def __len__(self):
        return self.grid.n


def _vals(f) -> np.ndarray:
    return f.values if isinstance(f, GridFunction) else np.asarray(f, dtype=float)


def integrate(f: GridFunction, h: float | None = None) -> float:
    """Midpoint rule ``h * sum(f_i)``.

    ``f`` may be a bare array, in which case ``h`` must be given.
    """
    if isinstance(f, GridFunction):
        h = f.grid.h
    elif h is None:
        raise TypeError("h is required when integrating a bare array")
    return float(h * np.sum(_vals(f)))


def diff1(v: np.ndarray, h: float) -> np.ndarray:
    """First derivative of cell samples; array version of :func:`deriv1`."""
    v = np.asarray(v, dtype=float)
    if v.size < 3:
        raise ValueError("deriv1 needs at least 3 cells")
    d = np.empty_like(v)
    d[1:-1] = (v[2:] - v[:-2]) / (2.0 * h)
    d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
    d[-1] = (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * h)
    return d


def diff2(v: np.ndarray, h: float) -> np.ndarray:
    """Second derivative of cell samples; array version of :func:`deriv2`."""
    v = np.asarray(v, dtype=float)
    if v.size < 5:
        raise ValueError("deriv2 needs at least 5 cells")
    d = np.empty_like(v)
    h2 = h * h
    d[1:-1] = (v[:-2] - 2.0 * v[1:-1] + v[2:]) / h2
    # one-sided, second order, exact on cubics
    d[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / h2
    d[-1] = (2.0 * v[-1] - 5.0 * v[-2] + 4.0 * v[-3] - v[-4]) / h2
    return d


def deriv1(f: GridFunction) -> GridFunction:
    """Central differences inside, second-order one-sided stencils at both ends."""
    return f.with_values(diff1(f.values, f.grid.h))


def deriv2(f: GridFunction) -> GridFunction:
    """Three-point second difference inside, second-order one-sided at both ends."""
    return f.with_values(diff2(f.values, f.grid.h))


def sobolev_norm(f: GridFunction, order: int) -> float:
    r"""Discrete :math:`H^s` norm, ``s = order`` in {0, 1, 2}.

    .. math:: \|f\|_{H^s}^2 = \sum_{j \le s} \int (\partial^j f)^2
    """
    if order not in (0, 1, 2):
        raise ValueError(f"order must be 0, 1 or 2, got {order}")
    return float(np.sqrt(sobolev_sq(f.values, f.grid.h, order)))


def sobolev_sq(v: np.ndarray, h: float, order: int) -> float:
    """Squared discrete Sobolev norm of a bare array of cell samples."""
    total = h * np.sum(v * v)
    if order >= 1:
        d1 = diff1(v, h)
        total += h * np.sum(d1 * d1)
    if order >= 2:
        d2 = diff2(v, h)
        total += h * np.sum(d2 * d2)
    return float(total)
