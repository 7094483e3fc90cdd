"""
JKO minimizing movements for the Fokker-Planck energy on an interval.

One step solves

    rho_{k+1} = argmin_rho  J(rho) + W_2^2(rho, rho_k) / (2 tau).

In quantile coordinates ``X(s)``, ``s in [0, 1]``, this is the strictly convex
problem

    min_X  int -log X'(s) + V(X(s)) ds + 1/(2 tau) int |X - X_k|^2 ds,

discretised with ``X_j = X(j/m)``, ``X_0 = a`` and ``X_m = b`` held fixed
(a density bounded below has full support) and solved by damped Newton with a
tridiagonal Hessian.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded

from .errors import MonotonicityLoss, NonConvergence, SmallnessViolated
from .functionals import DEFAULT_FLOOR, Density, Potential, entropy_J, gibbs_density
from .grid import Grid1D, GridFunction
from .transport import TransportPlan, inverse_cdf_function, optimal_plan

log = logging.getLogger(__name__)

_ARMIJO = 1e-4


@dataclass(frozen=True)
class JKOConfig:
    tau: float
    newton_tol: float = 1e-10
    max_newton: int = 50
    m: int | None = None
    damping: float = 0.5

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not self.newton_tol > 0:
            raise ValueError(f"newton_tol must be positive, got {self.newton_tol}")
        if not 0 < self.damping < 1:
            raise ValueError(f"damping must lie in (0, 1), got {self.damping}")
        if self.max_newton < 1:
            raise ValueError("max_newton must be at least 1")

    def nodes(self, grid: Grid1D) -> int:
        return 4 * grid.n if self.m is None else int(self.m)

    def check_potential(self, V: Potential) -> None:
        if not 1.0 + 2.0 * V.lam * self.tau > 0:
            raise SmallnessViolated(
                f"1 + 2 lambda tau = {1 + 2 * V.lam * self.tau:.3g} <= 0 "
                f"(lambda={V.lam:.3g}, tau={self.tau:.3g})")


@dataclass
class QuantileProblem:
    """Discrete JKO objective in quantile coordinates.

    ``Xp`` holds the previous quantile values at ``s_j = j/m`` (endpoints
    included). The unknown is the interior displacement ``u = X[1:m] - Xp[1:m]``;
    increments are formed as ``diff(Xp) + diff(u)`` so that they keep full
    relative precision when ``m`` is large. The scaled residual ``m * grad``
    approximates the pointwise optimality condition
    ``(log rho + V)' + (X - Xp)/tau``.

    ``balance`` is an optional fixed vector added to the residual (a linear
    term in the energy). :func:`balance_term` chooses it so that the quantile
    vector of the Gibbs density is an exact discrete equilibrium.
    """

    Xp: np.ndarray
    V: Potential
    tau: float
    balance: np.ndarray | None = None

    def __post_init__(self):
        self.Xp = np.asarray(self.Xp, dtype=float)
        if self.balance is None:
            self.balance = np.zeros(len(self.Xp) - 2)
        self.dXp = np.diff(self.Xp)
        m = self.m
        self.weights = np.ones(m + 1)
        self.weights[0] = self.weights[-1] = 0.5

    @property
    def m(self) -> int:
        return len(self.Xp) - 1

    def increments(self, u: np.ndarray) -> np.ndarray:
        du = np.diff(np.concatenate(([0.0], u, [0.0])))
        return self.dXp + du

    def full(self, u: np.ndarray) -> np.ndarray:
        X = self.Xp.copy()
        X[1:-1] += u
        return X

    def energy(self, u: np.ndarray) -> float:
        """Objective value; ``+inf`` outside the monotone cone."""
        dX = self.increments(u)
        if np.any(dX <= 0):
            return math.inf
        m = self.m
        X = self.full(u)
        ent = -np.sum(np.log(m * dX))
        pot = np.sum(self.weights * self.V.evaluate(X))
        dist = np.sum(u * u) / (2.0 * self.tau)
        return float((ent + pot + dist + np.dot(self.balance, u)) / m)

    def residual(self, u: np.ndarray) -> np.ndarray:
        inv = 1.0 / self.increments(u)
        X = self.Xp[1:-1] + u
        return inv[1:] - inv[:-1] + self.V.evaluate(X, 1) + u / self.tau + self.balance

    def gradient(self, u: np.ndarray) -> np.ndarray:
        return self.residual(u) / self.m

    def hessian_bands(self, u: np.ndarray) -> np.ndarray:
        """Banded (``solve_banded`` layout) Hessian of ``m * energy``."""
        inv2 = 1.0 / self.increments(u) ** 2
        X = self.Xp[1:-1] + u
        diag = inv2[1:] + inv2[:-1] + self.V.evaluate(X, 2) + 1.0 / self.tau
        off = -inv2[1:-1]
        ab = np.zeros((3, len(u)))
        ab[0, 1:] = off
        ab[1] = diag
        ab[2, :-1] = off
        return ab

    def w2(self, u: np.ndarray) -> float:
        return float(np.sqrt(np.sum(u * u) / self.m))


def newton_solve(prob: QuantileProblem, cfg: JKOConfig, u0: np.ndarray | None = None):
    """Damped Newton with backtracking; returns ``(u, iterations, residual_norm)``."""
    u = np.zeros(prob.m - 1) if u0 is None else np.array(u0, dtype=float)
    E = prob.energy(u)
    if not math.isfinite(E):
        raise MonotonicityLoss("initial quantile vector is not strictly increasing")
    r = prob.residual(u)
    rnorm = float(np.max(np.abs(r)))
    it = 0
    while rnorm > cfg.newton_tol:
        if it >= cfg.max_newton:
            raise NonConvergence(
                f"Newton did not reach {cfg.newton_tol:g} in {cfg.max_newton} "
                f"iterations (residual {rnorm:.3e})")
        d = solve_banded((1, 1), prob.hessian_bands(u), -r)
        slope = float(np.dot(r, d)) / prob.m
        # roundoff floor for the sufficient-decrease test near the optimum
        slack = 1e-13 * (1.0 + abs(E))
        alpha = 1.0
        while True:
            u_new = u + alpha * d
            E_new = prob.energy(u_new)
            if E_new <= E + _ARMIJO * alpha * slope + slack:
                break
            alpha *= cfg.damping
            if alpha < 1e-14:
                raise MonotonicityLoss("backtracking could not keep X increasing")
        u, E = u_new, E_new
        r = prob.residual(u)
        rnorm = float(np.max(np.abs(r)))
        it += 1
    return u, it, rnorm


def quantile_nodes(rho: Density, m: int) -> np.ndarray:
    """Smooth quantile values at ``s_j = j/m``, endpoints pinned to ``a`` and ``b``."""
    s = np.arange(m + 1) / m
    X = inverse_cdf_function(rho, smooth=True)(s)
    X[0], X[-1] = rho.grid.a, rho.grid.b
    if np.any(np.diff(X) <= 0):
        raise MonotonicityLoss("quantile nodes not strictly increasing")
    return X


def balance_term(V: Potential, m: int, floor: float = DEFAULT_FLOOR) -> np.ndarray:
    """Minus the discrete stationarity defect of the Gibbs quantile vector.

    The defect is O(1/m^2); cancelling it makes ``gibbs_density(V)`` a fixed
    point of the discrete step instead of a near-fixed point.
    """
    Xs = quantile_nodes(gibbs_density(V, floor), m)
    inv = 1.0 / np.diff(Xs)
    return -(inv[1:] - inv[:-1] + V.evaluate(Xs[1:-1], 1))


def resample(X: np.ndarray, grid: Grid1D) -> np.ndarray:
    """Cell averages on ``grid`` of the density whose quantile nodes are ``X``.

    The CDF ``F(X_j) = j/m`` is interpolated by a cubic spline (linear if the
    spline is not increasing) and differenced across the cell interfaces.
    """
    m = len(X) - 1
    s = np.arange(m + 1) / m
    spl = CubicSpline(X, s)
    probe = np.linspace(X[0], X[-1], 4 * m + 1)
    if np.all(spl(probe, 1) > 0):
        F = spl(grid.edges)
    else:
        F = np.interp(grid.edges, X, s)
    F[0], F[-1] = 0.0, 1.0
    return np.diff(F) / grid.h


@dataclass(frozen=True)
class JKOStepResult:
    """One minimizing-movement step.

    ``plan`` transports ``rho_next`` onto ``rho_prev``, so ``plan.phi`` is the
    Kantorovich potential appearing in the optimality condition
    ``log rho_next + V + phi / tau = const``.
    """

    rho_prev: Density = field(repr=False)
    rho_next: Density = field(repr=False)
    plan: TransportPlan = field(repr=False)
    tau: float
    J_prev: float
    J_next: float
    w2: float
    optimality_residual: float
    newton_iters: int
    residual_norm: float
    renorm_factor: float
    X: np.ndarray = field(repr=False, default=None)

    def optimality_field(self, V: Potential) -> np.ndarray:
        return np.log(self.rho_next.values) + V.values + self.plan.phi.values / self.tau

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "J_prev": self.J_prev,
            "J_next": self.J_next,
            "w2": self.w2,
            "optimality_residual": self.optimality_residual,
            "newton_iters": self.newton_iters,
            "residual_norm": self.residual_norm,
            "renorm_factor": self.renorm_factor,
        }


def jko_step(rho_prev: Density, V: Potential, cfg: JKOConfig) -> JKOStepResult:
    """Compute ``rho_{k+1}`` from ``rho_k`` by one JKO step."""
    cfg.check_potential(V)
    grid = rho_prev.grid
    m = cfg.nodes(grid)
    Xp = quantile_nodes(rho_prev, m)
    prob = QuantileProblem(Xp, V, cfg.tau, balance_term(V, m, rho_prev.floor))
    u, iters, rnorm = newton_solve(prob, cfg)
    X = prob.full(u)

    # increment form: the quantile round trip rho -> X -> rho is not exactly
    # the identity, and resampling only the change keeps its error out of rho
    vals = rho_prev.values + (resample(X, grid) - resample(Xp, grid))
    if vals.min() < rho_prev.floor:
        vals = resample(X, grid)
    mass = grid.h * vals.sum()
    vals = vals / mass
    rho_next = Density(GridFunction(grid, vals), rho_prev.floor)

    plan = optimal_plan(rho_next, rho_prev, m)
    opt = np.log(vals) + V.values + plan.phi.values / cfg.tau
    log.debug("jko step: %d Newton iterations, residual %.2e", iters, rnorm)
    return JKOStepResult(
        rho_prev=rho_prev, rho_next=rho_next, plan=plan, tau=cfg.tau,
        J_prev=entropy_J(rho_prev, V), J_next=entropy_J(rho_next, V),
        w2=prob.w2(u), optimality_residual=float(np.std(opt)),
        newton_iters=iters, residual_norm=rnorm, renorm_factor=float(1.0 / mass),
        X=X,
    )


@dataclass(frozen=True)
class JKOTrajectory:
    """``rho_0, ..., rho_N`` with ``rho^tau(t) = rho_{k+1}`` on ``(k tau, (k+1) tau]``."""

    tau: float
    steps: tuple = field(repr=False)
    densities: tuple = field(repr=False)

    @property
    def N(self) -> int:
        return len(self.steps)

    @property
    def horizon(self) -> float:
        return self.N * self.tau

    @property
    def grid(self) -> Grid1D:
        return self.densities[0].grid

    def values(self) -> np.ndarray:
        """``(N + 1, n)`` array of all iterates."""
        return np.array([d.values for d in self.densities])

    def index_at(self, t: float) -> int:
        """Index ``k + 1`` of the iterate representing time ``t``."""
        if t <= 0:
            return 0
        k = math.ceil(t / self.tau - 1e-12) - 1
        return min(max(k, 0), self.N - 1) + 1

    def __call__(self, t: float) -> np.ndarray:
        return self.densities[self.index_at(t)].values


def steps_for(T: float, tau: float) -> int:
    N = round(T / tau)
    if N < 1 or abs(N * tau - T) > 1e-9 * max(1.0, abs(T)):
        raise ValueError(f"T={T!r} is not an integer multiple of tau={tau!r}")
    return N


def run_trajectory(rho0: Density, V: Potential, T: float, cfg: JKOConfig) -> JKOTrajectory:
    """Chain ``T / tau`` JKO steps from ``rho0``."""
    N = steps_for(T, cfg.tau)
    steps = []
    rho = rho0
    dens = [rho0]
    for _ in range(N):
        st = jko_step(rho, V, cfg)
        steps.append(st)
        rho = st.rho_next
        dens.append(rho)
    return JKOTrajectory(cfg.tau, tuple(steps), tuple(dens))


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(3)


@dataclass(frozen=True)
class InterpolatedCurve:
    """Piecewise-affine-in-time regularisation of a JKO trajectory.

    On ``(k tau, k tau + (1 - eps) tau]`` the curve equals ``rho_{k+1}``; on the
    remaining ``eps tau`` it blends linearly into ``rho_{k+2}``. The last
    interval holds ``rho_N``.
    """

    base: JKOTrajectory = field(repr=False)
    eps: float

    def __call__(self, t: float) -> np.ndarray:
        tr = self.base
        tau, N = tr.tau, tr.N
        if t <= 0:
            return tr.densities[0].values
        k = min(max(math.ceil(t / tau - 1e-12) - 1, 0), N - 1)
        if k == N - 1:
            return tr.densities[N].values
        start = k * tau + (1.0 - self.eps) * tau
        if t <= start:
            return tr.densities[k + 1].values
        theta = (t - start) / (self.eps * tau)
        return (1.0 - theta) * tr.densities[k + 1].values + theta * tr.densities[k + 2].values

    def l2l2_distance(self) -> float:
        """``||rho^tau - rho^{tau,eps}||`` in ``L^2(0,T; L^2)`` by Gauss quadrature in time.

        The two curves agree outside the blend intervals; on each blend interval
        the integrand is quadratic in ``t`` and 3-point Gauss-Legendre is exact.
        """
        tr = self.base
        tau, h = tr.tau, tr.grid.h
        total = 0.0
        for k in range(tr.N - 1):
            lo = k * tau + (1.0 - self.eps) * tau
            hi = (k + 1) * tau
            half = 0.5 * (hi - lo)
            for node, weight in zip(_GL_NODES, _GL_WEIGHTS):
                t = lo + half * (node + 1.0)
                diff = self(t) - tr(t)
                total += weight * half * h * np.sum(diff * diff)
        return float(np.sqrt(total))

    def closed_form_distance(self) -> float:
        """``sqrt(eps/3 * sum_k tau * int (rho_{k+2} - rho_{k+1})^2)``."""
        tr = self.base
        v = tr.values()
        d = v[2:] - v[1:-1]
        return float(np.sqrt(self.eps / 3.0 * tr.tau * tr.grid.h * np.sum(d * d)))


def interpolate_eps(traj: JKOTrajectory, eps: float) -> InterpolatedCurve:
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    return InterpolatedCurve(traj, eps)
