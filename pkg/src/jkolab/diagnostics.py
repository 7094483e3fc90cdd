"""
Discrete inequalities and identities evaluated on JKO sequences.

Each check returns an :class:`InequalityReport` whose ``margin`` is
``lhs - rhs`` (or minus the defect, for identities) and which is satisfied
when ``margin >= -tol``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InsufficientData, MonotonicityLoss, SmallnessViolated
from .fokker_planck import f2_terms
from .functionals import Density, Potential, entropy_J, fisher_Fp, gibbs_density
from .grid import diff1, diff2
from .jko import JKOStepResult, JKOTrajectory
from .transport import TransportPlan, cdf_function, inverse_cdf_function, optimal_plan


@dataclass
class InequalityReport:
    name: str
    lhs: float
    rhs: float
    margin: float
    tol: float
    satisfied: bool
    context: dict = field(default_factory=dict)

    @classmethod
    def compare(cls, name, lhs, rhs, tol, **context):
        """Report for ``lhs >= rhs`` up to ``tol``."""
        lhs, rhs = float(lhs), float(rhs)
        margin = lhs - rhs
        return cls(name, lhs, rhs, margin, float(tol), bool(margin >= -tol), context)

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: _jsonable(v) for k, v in d.items()}


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _H1(z, p):
    return np.abs(z) ** (p - 2) * z


def _H2(z, p):
    return (p - 1) * np.abs(z) ** (p - 2)


def _edge_value(v, side):
    # quadratic extrapolation from the three cells next to the boundary
    if side == 0:
        return 15.0 / 8.0 * v[0] - 5.0 / 4.0 * v[1] + 3.0 / 8.0 * v[2]
    return 15.0 / 8.0 * v[-1] - 5.0 / 4.0 * v[-2] + 3.0 / 8.0 * v[-3]


def check_five_gradients(rho: Density, g: Density, p: float,
                         plan: TransportPlan | None = None) -> InequalityReport:
    """Five-gradients identity for ``H(z) = |z|^p / p`` on an interval.

    ``int rho' H'(phi') + g' H'(psi')`` is compared with the interior
    remainder ``int rho H''(phi') phi''^2 / (1 - phi'')`` plus the endpoint
    terms ``rho H'(phi') n + g H'(psi') n`` with ``n(a) = -1``, ``n(b) = +1``.
    """
    if plan is None:
        plan = optimal_plan(rho, g)
    grid = rho.grid
    h, x = grid.h, grid.nodes
    r, q = rho.values, g.values
    dphi = x - plan.T.values
    dpsi = x - plan.S.values
    phi2 = diff2(plan.phi.values, h)
    gap = 1.0 - phi2
    if np.any(gap <= 0):
        raise MonotonicityLoss("1 - phi'' <= 0: transport map not increasing")

    lhs = h * np.sum(diff1(r, h) * _H1(dphi, p) + diff1(q, h) * _H1(dpsi, p))
    interior = h * np.sum(r * _H2(dphi, p) * phi2 ** 2 / gap)

    T_of, S_of = inverse_cdf_function(g), inverse_cdf_function(rho)
    F_rho, F_g = cdf_function(rho), cdf_function(g)
    boundary = []
    for side, xb, normal in ((0, grid.a, -1.0), (1, grid.b, 1.0)):
        dphi_b = xb - float(T_of(F_rho(np.array([xb])))[0])
        dpsi_b = xb - float(S_of(F_g(np.array([xb])))[0])
        boundary.append(float(
            _edge_value(r, side) * _H1(dphi_b, p) * normal
            + _edge_value(q, side) * _H1(dpsi_b, p) * normal))
    rhs = interior + sum(boundary)
    defect = abs(lhs - rhs)
    tol = 1e-3 * (1.0 + abs(lhs))
    positive = interior >= -1e-8 and min(boundary) >= -1e-8
    return InequalityReport(
        "five_gradients", float(lhs), float(rhs), -defect, tol,
        bool(defect <= tol and positive),
        {"p": p, "interior_remainder": float(interior), "boundary_a": boundary[0],
         "boundary_b": boundary[1], "remainders_nonnegative": bool(positive)})


def check_flow_interchange(step: JKOStepResult, V: Potential, tol: float = 1e-6) -> InequalityReport:
    """``int rho_k^2 >= int rho_{k+1}^2 + 2 tau int (|rho'|^2 + rho rho' V')`` at ``rho_{k+1}``."""
    h = V.grid.h
    r0, r1 = step.rho_prev.values, step.rho_next.values
    d1 = diff1(r1, h)
    diss = h * np.sum(d1 * d1 + r1 * d1 * diff1(V.values, h))
    lhs = h * np.sum(r0 * r0)
    rhs = h * np.sum(r1 * r1) + 2.0 * step.tau * diss
    return InequalityReport.compare("flow_interchange", lhs, rhs, tol, tau=step.tau)


def check_lp_decay(step: JKOStepResult, V: Potential, p: float = 2.0,
                   tol: float = 1e-8) -> InequalityReport:
    """``int rho_k^p >= (1 - tau p (p-1) Lip(V)^2 / 4) int rho_{k+1}^p``."""
    coef = 1.0 - step.tau * p * (p - 1.0) * V.lip ** 2 / 4.0
    if not coef > 0:
        raise SmallnessViolated(f"L^p decay coefficient {coef:.3g} <= 0 for tau={step.tau}")
    h = V.grid.h
    lhs = h * np.sum(step.rho_prev.values ** p)
    rhs = coef * h * np.sum(step.rho_next.values ** p)
    return InequalityReport.compare("lp_decay", lhs, rhs, tol, p=p, coefficient=coef, tau=step.tau)


def check_energy_step(step: JKOStepResult, V: Potential, tol: float = 1e-9) -> InequalityReport:
    """``J(rho_k) >= J(rho_{k+1}) + W_2^2 / (2 tau)``: the minimiser beats the previous iterate."""
    return InequalityReport.compare(
        "energy_step", step.J_prev, step.J_next + step.w2 ** 2 / (2.0 * step.tau), tol,
        tau=step.tau)


def check_w2_telescope(traj: JKOTrajectory, V: Potential, tol: float = 1e-6) -> InequalityReport:
    """``sum_k W_2^2(rho_k, rho_{k+1}) / tau <= 2 (J(rho_0) - inf J)``."""
    floor = traj.densities[0].floor
    lhs = 2.0 * (entropy_J(traj.densities[0], V) - entropy_J(gibbs_density(V, floor), V))
    rhs = sum(s.w2 ** 2 for s in traj.steps) / traj.tau
    return InequalityReport.compare("w2_telescope", lhs, rhs, tol, tau=traj.tau, steps=traj.N)


def check_fp_decay(traj: JKOTrajectory, V: Potential, p: float = 2.0) -> list:
    """Per-step ``F_p(rho_k) >= (1 + p lambda tau) F_p(rho_{k+1})``."""
    factor = 1.0 + p * V.lam * traj.tau
    if not factor > 0:
        raise SmallnessViolated(f"1 + p lambda tau = {factor:.3g} <= 0")
    F = [fisher_Fp(d, V, p) for d in traj.densities]
    return [
        InequalityReport.compare("fp_decay", F[k], factor * F[k + 1], 1e-6 * (1.0 + F[k]),
                                 step=k, p=p, factor=factor, tau=traj.tau)
        for k in range(traj.N)
    ]


def maxmin_margins(traj: JKOTrajectory, V: Potential) -> np.ndarray:
    """Per-iterate distance of ``log rho_k + V`` to the band of ``rho_0``; negative means escape."""
    q0 = np.log(traj.densities[0].values) + V.values
    lo, hi = q0.min(), q0.max()
    out = []
    for d in traj.densities[1:]:
        q = np.log(d.values) + V.values
        out.append(min(q.min() - lo, hi - q.max()))
    return np.array(out)


def check_maxmin(traj: JKOTrajectory, V: Potential, tol: float = 1e-5) -> InequalityReport:
    """``min(log rho_0 + V) <= log rho_k + V <= max(log rho_0 + V)`` for every ``k``."""
    q0 = np.log(traj.densities[0].values) + V.values
    margins = maxmin_margins(traj, V)
    worst = int(np.argmin(margins)) if len(margins) else 0
    margin = float(margins.min()) if len(margins) else 0.0
    return InequalityReport("maxmin", 0.0, -margin, margin, tol, bool(margin >= -tol),
                            {"band_low": float(q0.min()), "band_high": float(q0.max()),
                             "worst_step": worst, "tau": traj.tau})


def f2_dissipation_sum(traj: JKOTrajectory, V: Potential) -> float:
    """``sum_k tau [int |(log rho_k + V)''|^2 rho_k + int ((log rho_k + V)')^2 V'' rho_k]``, k = 1..N."""
    total = 0.0
    for d in traj.densities[1:]:
        _, hess, curv = f2_terms(d.values, V)
        total += traj.tau * (hess + curv)
    return float(total)


def check_f2_dissipation_jko(traj: JKOTrajectory, V: Potential) -> InequalityReport:
    """``F_2(rho_0) - F_2(rho_N) >= dissipation sum - delta(tau)``.

    ``delta(tau) = |lhs - rhs|`` is recorded in the context; its decay under
    refinement is checked by :func:`check_f2_refinement`.
    """
    F0 = f2_terms(traj.densities[0].values, V)[0]
    FN = f2_terms(traj.densities[-1].values, V)[0]
    lhs = F0 - FN
    rhs = f2_dissipation_sum(traj, V)
    delta = abs(lhs - rhs)
    return InequalityReport.compare("f2_dissipation_jko", lhs, rhs, delta + 1e-8,
                                    delta=delta, tau=traj.tau)


def check_f2_refinement(reports: list) -> InequalityReport:
    """``delta(tau)`` must shrink along a family ordered by decreasing ``tau``."""
    ordered = sorted(reports, key=lambda r: -r.context["tau"])
    deltas = [r.context["delta"] for r in ordered]
    steps = [deltas[i] - deltas[i + 1] for i in range(len(deltas) - 1)]
    margin = min(steps) if steps else 0.0
    # at equilibrium every delta is roundoff and the ordering carries no information
    converged = bool(deltas) and max(deltas) <= 1e-10
    return InequalityReport("f2_delta_decreasing", deltas[0] if deltas else 0.0,
                            deltas[-1] if deltas else 0.0, float(margin), 0.0,
                            bool(margin >= 0 or converged),
                            {"taus": [r.context["tau"] for r in ordered], "deltas": deltas})


@dataclass
class ScalingReport:
    """Log-log fits of transport displacement against ``tau`` and ``W_2``."""

    taus: list
    displacement: list
    w2: list
    hessian: list
    exponent_tau: float = float("nan")
    constant_tau: float = float("nan")
    residual_tau: float = float("nan")
    exponent_w2: float = float("nan")
    constant_w2: float = float("nan")
    residual_w2: float = float("nan")
    beta_hessian: float = float("nan")
    target_tau: float = 1.0 / 3.0
    target_w2: float = 2.0 / 3.0
    degenerate: bool = False
    satisfied: bool = True

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


def _loglog(x, y):
    lx, ly = np.log(np.asarray(x)), np.log(np.asarray(y))
    slope, icpt = np.polyfit(lx, ly, 1)
    resid = float(np.sqrt(np.mean((ly - (slope * lx + icpt)) ** 2)))
    return float(slope), float(np.exp(icpt)), resid


def fit_displacement_scaling(trajs: list, tol: float = 0.1) -> ScalingReport:
    """Fit ``max_k ||id - T_k||_inf`` against ``tau`` and ``max_k W_2``.

    In one dimension the expected floors are ``1/3`` against ``tau`` and
    ``2/3`` against ``W_2``; ``beta_hessian`` is the exponent of
    ``max_k ||phi_k''||_inf`` against ``tau`` and must be positive.
    """
    if len(trajs) < 4:
        raise InsufficientData(f"need at least 4 step sizes, got {len(trajs)}")
    trajs = sorted(trajs, key=lambda t: -t.tau)
    taus, disp, w2, hess = [], [], [], []
    for tr in trajs:
        h = tr.grid.h
        x = tr.grid.nodes
        taus.append(tr.tau)
        disp.append(max(float(np.max(np.abs(x - s.plan.T.values))) for s in tr.steps))
        w2.append(max(s.w2 for s in tr.steps))
        hess.append(max(float(np.max(np.abs(diff2(s.plan.phi.values, h)))) for s in tr.steps))
    rep = ScalingReport(taus, disp, w2, hess)
    if max(disp) <= 1e-12 or min(disp) <= 0 or min(w2) <= 0:
        rep.degenerate = True
        return rep
    rep.exponent_tau, rep.constant_tau, rep.residual_tau = _loglog(taus, disp)
    rep.exponent_w2, rep.constant_w2, rep.residual_w2 = _loglog(w2, disp)
    rep.beta_hessian = _loglog(taus, hess)[0]
    rep.satisfied = bool(rep.exponent_tau >= rep.target_tau - tol
                         and rep.exponent_w2 >= rep.target_w2 - tol
                         and rep.beta_hessian > 0)
    return rep


def run_suite(traj: JKOTrajectory, V: Potential, p: float = 2.0,
              five_gradients: bool = True) -> list:
    """Every per-step and per-trajectory check on one trajectory."""
    reports = []
    for k, st in enumerate(traj.steps):
        for rep in (check_energy_step(st, V), check_flow_interchange(st, V),
                    check_lp_decay(st, V, p)):
            rep.context["step"] = k
            reports.append(rep)
        if five_gradients:
            rep = check_five_gradients(st.rho_next, st.rho_prev, p, st.plan)
            rep.context["step"] = k
            reports.append(rep)
    reports.extend(check_fp_decay(traj, V, p))
    reports.append(check_maxmin(traj, V))
    reports.append(check_w2_telescope(traj, V))
    reports.append(check_f2_dissipation_jko(traj, V))
    return reports


def worst_margins(reports: list) -> dict:
    """Smallest margin per check name."""
    out = {}
    for r in reports:
        out[r.name] = min(out.get(r.name, math.inf), r.margin)
    return out
