"""
Exact optimal transport on an interval.

In one dimension the quadratic-cost optimal map is the monotone
rearrangement ``T = X_g o F_rho`` and ``W_2^2 = int_0^1 |X_rho - X_g|^2 ds``,
where ``F`` is a cumulative distribution and ``X`` its inverse (the quantile
function). Densities are read as cell averages, so the CDF is exact at cell
interfaces.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import MonotonicityLoss
from .functionals import Density
from .grid import GridFunction


def edge_cdf(rho: Density) -> np.ndarray:
    """Cumulative mass at the ``n + 1`` cell interfaces, pinned to 0 and 1."""
    F = np.concatenate(([0.0], np.cumsum(rho.values) * rho.grid.h))
    F /= F[-1]
    F[-1] = 1.0
    if np.any(np.diff(F) <= 0):
        raise MonotonicityLoss("CDF has vanishing increments (density floor violated)")
    return F


def cdf(rho: Density) -> GridFunction:
    """CDF at the cell centres by midpoint accumulation."""
    F = edge_cdf(rho)
    return GridFunction(rho.grid, F[:-1] + 0.5 * rho.grid.h * rho.values)


def _increasing_spline(x, y):
    """Not-a-knot cubic through increasing data, or ``None`` if it is not monotone."""
    spl = CubicSpline(x, y)
    probe = np.linspace(x[0], x[-1], 4 * len(x) + 1)
    if np.all(spl(probe, 1) > 0):
        return spl
    return None


def cdf_function(rho: Density, smooth: bool = True):
    """Return ``x -> F(x)`` valid on ``[a, b]``.

    ``smooth=True`` uses a cubic spline through the interface values and falls
    back to linear interpolation when the spline would not be increasing.
    """
    xe, F = rho.grid.edges, edge_cdf(rho)
    spl = _increasing_spline(xe, F) if smooth else None
    if spl is None:
        return lambda x: np.interp(x, xe, F)
    return lambda x: np.clip(spl(x), 0.0, 1.0)


def inverse_cdf_function(rho: Density, smooth: bool = True):
    """Return the quantile function ``s -> X(s)`` on ``[0, 1]``."""
    xe, F = rho.grid.edges, edge_cdf(rho)
    spl = _increasing_spline(F, xe) if smooth else None
    grid = rho.grid
    if spl is None:
        return lambda s: np.interp(s, F, xe)
    return lambda s: np.clip(spl(s), grid.a, grid.b)


@dataclass(frozen=True)
class QuantileFn:
    """Quantile values ``X`` at the nodes ``s_j = (j + 1/2) / m``."""

    s: np.ndarray = field(repr=False)
    X: np.ndarray = field(repr=False)

    @property
    def m(self) -> int:
        return len(self.X)


def quantile(rho: Density, m: int | None = None) -> QuantileFn:
    """Piecewise-linear inversion of the CDF at ``m`` midpoint quantile nodes."""
    m = 4 * rho.grid.n if m is None else int(m)
    s = (np.arange(m) + 0.5) / m
    X = np.interp(s, edge_cdf(rho), rho.grid.edges)
    if np.any(np.diff(X) <= 0):
        raise MonotonicityLoss("quantile function not strictly increasing")
    return QuantileFn(s, X)


def w2_distance(rho: Density, g: Density, m: int | None = None) -> float:
    """Quadratic Wasserstein distance through the quantile identity."""
    if m is None:
        m = 4 * max(rho.grid.n, g.grid.n)
    d = quantile(rho, m).X - quantile(g, m).X
    return float(np.sqrt(np.mean(d * d)))


@dataclass(frozen=True)
class TransportPlan:
    """Optimal transport from ``source`` to ``target``.

    ``T`` pushes ``source`` onto ``target`` and ``S`` is its inverse; both are
    sampled at cell centres. The potentials satisfy ``phi' = x - T`` and
    ``psi' = y - S`` and integrate to zero.
    """

    source: Density = field(repr=False)
    target: Density = field(repr=False)
    T: GridFunction = field(repr=False)
    S: GridFunction = field(repr=False)
    phi: GridFunction = field(repr=False)
    psi: GridFunction = field(repr=False)
    w2: float


def cumulative_potential(slope: np.ndarray, h: float) -> np.ndarray:
    """Trapezoidal antiderivative of cell-centred slopes, shifted to zero mean."""
    phi = np.concatenate(([0.0], np.cumsum(0.5 * h * (slope[1:] + slope[:-1]))))
    return phi - phi.mean()


def optimal_plan(rho: Density, g: Density, m: int | None = None,
                 smooth: bool = True) -> TransportPlan:
    """Monotone rearrangement between two densities on the same grid."""
    grid = rho.grid
    x = grid.nodes
    T = inverse_cdf_function(g, smooth)(cdf_function(rho, smooth)(x))
    S = inverse_cdf_function(rho, smooth)(cdf_function(g, smooth)(x))
    if np.any(np.diff(T) < 0) or np.any(np.diff(S) < 0):
        raise MonotonicityLoss("optimal map lost monotonicity")
    phi = cumulative_potential(x - T, grid.h)
    psi = cumulative_potential(x - S, grid.h)
    return TransportPlan(
        source=rho, target=g,
        T=GridFunction(grid, T), S=GridFunction(grid, S),
        phi=GridFunction(grid, phi), psi=GridFunction(grid, psi),
        w2=w2_distance(rho, g, m),
    )


def displacement_sup(plan: TransportPlan) -> float:
    """``max_i |x_i - T(x_i)|``."""
    return float(np.max(np.abs(plan.T.grid.nodes - plan.T.values)))


def duality_residual(plan: TransportPlan, skip: int = 1) -> float:
    """Spread of ``phi(x) + psi(T(x)) - |x - T(x)|^2 / 2`` over interior cells.

    Kantorovich duality makes this quantity constant; the returned value is its
    maximal deviation from the mean, ``skip`` cells being dropped at each end.
    """
    x = plan.T.grid.nodes
    T = plan.T.values
    psi_at_T = CubicSpline(x, plan.psi.values)(T)
    r = plan.phi.values + psi_at_T - 0.5 * (x - T) ** 2
    r = r[skip:len(r) - skip]
    return float(np.max(np.abs(r - r.mean())))


def transport_cost(plan: TransportPlan) -> float:
    """``int |x - T(x)|^2 rho(x) dx``; equals ``w2**2`` up to quadrature error."""
    x = plan.T.grid.nodes
    return float(plan.source.grid.h * np.sum((x - plan.T.values) ** 2 * plan.source.values))
