"""
Step-size refinement studies: JKO trajectories for a family of ``tau``
against one implicit-Euler reference solution on the same grid.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from .errors import InvalidValue, OracleTooCoarse
from .families import make_density, make_potential
from .fokker_planck import FPSolution, f2_balance, fp_solve
from .functionals import DEFAULT_FLOOR
from .grid import Grid1D, sobolev_sq
from .jko import JKOConfig, JKOTrajectory, interpolate_eps, run_trajectory, steps_for

NORMS = ("L2L2", "L2H1", "L2H2")
_ORDER = {"L2L2": 0, "L2H1": 1, "L2H2": 2}
CHECKS = ("energy_step", "flow_interchange", "lp_decay", "five_gradients", "fp_decay",
          "maxmin", "w2_telescope", "f2_dissipation_jko")
# errors below this are treated as already converged when testing monotonicity
NOISE = 1e-8


@dataclass(frozen=True)
class StudyConfig:
    rho0: str
    V: str
    T: float
    taus: tuple
    n: int = 256
    m: int | None = None
    a: float = 0.0
    b: float = 1.0
    dt_ref: float | None = None
    norms: tuple = NORMS
    floor: float = DEFAULT_FLOOR
    newton_tol: float = 1e-10
    diagnostics: bool = True
    five_gradients: bool = True
    eps_values: tuple = (0.5, 0.25, 0.125)

    def __post_init__(self):
        object.__setattr__(self, "taus", tuple(sorted((float(t) for t in self.taus), reverse=True)))
        for tau in self.taus:
            try:
                steps_for(self.T, tau)
            except ValueError:
                raise InvalidValue("tau-list", f"step sizes dividing T={self.T}", repr(tau)) from None
        bad = [s for s in self.norms if s not in NORMS]
        if bad:
            raise InvalidValue("norms", "subset of " + ", ".join(NORMS), ",".join(bad))

    @property
    def reference_dt(self) -> float:
        """Reference step; by default ``min(tau) / 64``."""
        if self.dt_ref is not None:
            return float(self.dt_ref)
        return min(self.taus) / 64.0 if self.taus else self.T / 64.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["taus"] = list(self.taus)
        d["norms"] = list(self.norms)
        d["eps_values"] = list(self.eps_values)
        d["dt_ref"] = self.reference_dt
        return d


@dataclass
class StudyResult:
    config: StudyConfig
    taus: list
    errors: dict
    log_h2: list
    orders: dict = field(default_factory=dict)
    reports: list = field(default_factory=list)
    margins: list = field(default_factory=list)
    scaling: dg.ScalingReport | None = None
    eps: list = field(default_factory=list)
    f2: dict = field(default_factory=dict)
    oracle_gap: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)

    @property
    def empty(self) -> bool:
        return not self.taus

    @property
    def passed(self) -> bool:
        return all(r.satisfied for r in self.reports) and all(self.checks.values())

    def failures(self) -> list:
        out = [f"{r.name} (tau={r.context.get('tau')}, step={r.context.get('step')})"
               for r in self.reports if not r.satisfied]
        return out + [k for k, ok in self.checks.items() if not ok]


def spacetime_error(traj: JKOTrajectory, ref: FPSolution, order: int, log: bool = False) -> float:
    """``L^2(0,T; H^s)`` distance with the reference sampled at interval midpoints."""
    h, tau = traj.grid.h, traj.tau
    total = 0.0
    for k in range(traj.N):
        r = traj.densities[k + 1].values
        q = ref.at((k + 0.5) * tau)
        diff = np.log(r) - np.log(q) if log else r - q
        total += tau * sobolev_sq(diff, h, order)
    return float(np.sqrt(total))


def _oracle_gap(fine: FPSolution, coarse: FPSolution, tau: float, T: float, order: int) -> float:
    h = fine.grid.h
    total = 0.0
    for k in range(steps_for(T, tau)):
        t = (k + 0.5) * tau
        total += tau * sobolev_sq(fine.at(t) - coarse.at(t), h, order)
    return float(np.sqrt(total))


def fit_order(taus, errs):
    """Least-squares slope of ``log err`` against ``log tau`` and its RMS residual."""
    x, y = np.log(np.asarray(taus)), np.log(np.asarray(errs))
    slope, icpt = np.polyfit(x, y, 1)
    return float(slope), float(np.sqrt(np.mean((y - slope * x - icpt) ** 2)))


def _decreasing(errs) -> bool:
    if max(errs) <= NOISE:
        return True
    return all(e1 < e0 for e0, e1 in zip(errs, errs[1:]))


def run_study(cfg: StudyConfig) -> StudyResult:
    """Run every trajectory, measure errors, run diagnostics and fit orders.

    Raises
    ------
    OracleTooCoarse
        If ``dt_ref > min(tau) / 10`` or if halving the reference step moves it
        by 10% or more of the smallest JKO error in some norm.
    """
    taus = list(cfg.taus)
    errors = {s: [] for s in cfg.norms}
    result = StudyResult(cfg, taus, errors, [])
    if not taus:
        return result
    dt = cfg.reference_dt
    if dt > min(taus) / 10.0 * (1 + 1e-12):
        raise OracleTooCoarse(f"dt_ref={dt:g} exceeds min(tau)/10={min(taus) / 10:g}")

    grid = Grid1D(cfg.a, cfg.b, cfg.n)
    V = make_potential(cfg.V, grid)
    rho0 = make_density(cfg.rho0, grid, V, cfg.floor)
    coarse = fp_solve(rho0, V, cfg.T, dt)
    ref = fp_solve(rho0, V, cfg.T, dt / 2.0)

    trajs = []
    for tau in taus:
        traj = run_trajectory(rho0, V, cfg.T, JKOConfig(tau, newton_tol=cfg.newton_tol, m=cfg.m))
        trajs.append(traj)
        for s in cfg.norms:
            errors[s].append(spacetime_error(traj, ref, _ORDER[s]))
        result.log_h2.append(spacetime_error(traj, ref, 2, log=True))

    for s in cfg.norms:
        gap = _oracle_gap(ref, coarse, min(taus), cfg.T, _ORDER[s])
        result.oracle_gap[s] = gap
        if gap > 0.1 * min(errors[s]) + 1e-12:
            raise OracleTooCoarse(
                f"reference moves by {gap:.3g} in {s} when dt_ref is halved, "
                f"not below 10% of the smallest JKO error {min(errors[s]):.3g}")

    for s in cfg.norms:
        result.checks[f"{s}_decreasing"] = _decreasing(errors[s])
    result.checks["logH2_decreasing"] = _decreasing(result.log_h2)
    if "L2H2" in cfg.norms:
        ratios = [lg / e for lg, e in zip(result.log_h2, errors["L2H2"]) if e > NOISE]
        result.checks["logH2_ratio_bounded"] = all(r <= 10.0 for r in ratios)
    if len(taus) >= 2:
        for s in cfg.norms:
            if min(errors[s]) > NOISE:
                result.orders[s] = fit_order(taus, errors[s])
        if min(result.log_h2) > NOISE:
            result.orders["logH2"] = fit_order(taus, result.log_h2)
        if "L2L2" in result.orders:
            result.checks["L2L2_order"] = result.orders["L2L2"][0] >= 0.8

    finest = trajs[-1]
    for eps in cfg.eps_values:
        if finest.N < 2:
            break
        curve = interpolate_eps(finest, eps)
        dist, closed = curve.l2l2_distance(), curve.closed_form_distance()
        result.eps.append({"eps": eps, "distance": dist, "closed_form": closed,
                           "ratio": dist / math.sqrt(eps)})
    if result.eps:
        result.checks["eps_closed_form"] = all(
            abs(e["distance"] - e["closed_form"]) <= 1e-8 for e in result.eps)
        ratios = [e["ratio"] for e in result.eps]
        spread = (max(ratios) - min(ratios)) / max(max(ratios), 1e-300)
        result.checks["eps_sqrt_scaling"] = spread <= 0.05 or max(ratios) <= NOISE

    if cfg.diagnostics:
        f2_reports = []
        for traj in trajs:
            reps = dg.run_suite(traj, V, 2.0, cfg.five_gradients)
            result.reports.extend(reps)
            worst = dg.worst_margins(reps)
            result.margins.append({c: worst.get(c, float("nan")) for c in CHECKS})
            f2_reports.extend(r for r in reps if r.name == "f2_dissipation_jko")
        if len(f2_reports) >= 2:
            result.reports.append(dg.check_f2_refinement(f2_reports))
        pde = f2_balance(ref, V)
        jko = dg.f2_dissipation_sum(finest, V)
        rel_gap = abs(jko - pde["dissipation"])
        result.f2 = {"jko_dissipation": jko, "pde_dissipation": pde["dissipation"],
                     "relative_gap": rel_gap / max(abs(pde["dissipation"]), 1e-300),
                     "pde_identity_residual": pde["residual"], "tau": finest.tau}
        result.reports.append(dg.InequalityReport.compare(
            "f2_pde_match", 0.05 * abs(pde["dissipation"]) + 1e-10, rel_gap, 0.0,
            tau=finest.tau))
        if len(trajs) >= 4:
            result.scaling = dg.fit_displacement_scaling(trajs)
            result.checks["displacement_scaling"] = result.scaling.satisfied
            hess = result.scaling.hessian
            result.checks["hessian_decreasing"] = (
                result.scaling.degenerate or all(b < a for a, b in zip(hess, hess[1:])))
    return result


def _csv_columns(result: StudyResult) -> list:
    cols = ["tau"] + [f"e_{s}" for s in result.config.norms] + ["e_logH2"]
    if result.config.diagnostics:
        cols += [f"margin_{c}" for c in CHECKS]
    return cols


def error_table(result: StudyResult) -> list:
    """Rows of the CSV as floats, in column order."""
    rows = []
    for i, tau in enumerate(result.taus):
        row = [tau] + [result.errors[s][i] for s in result.config.norms] + [result.log_h2[i]]
        if result.config.diagnostics:
            row += [result.margins[i][c] for c in CHECKS]
        rows.append(row)
    return rows


def read_error_csv(path) -> tuple:
    """Header and float rows of a CSV written by :func:`emit_report`."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], [[float(v) for v in r] for r in rows[1:]]


def _summary(result: StudyResult) -> str:
    cfg = result.config
    lines = [f"rho0={cfg.rho0} V={cfg.V} T={cfg.T} n={cfg.n} dt_ref={cfg.reference_dt:g}"]
    if result.empty:
        lines.append("EMPTY: no step sizes requested")
        return "\n".join(lines) + "\n"
    lines.append("taus: " + " ".join(f"{t:g}" for t in result.taus))
    for s in list(cfg.norms) + ["logH2"]:
        errs = result.errors[s] if s in result.errors else result.log_h2
        line = f"{s}: " + " ".join(f"{e:.4e}" for e in errs)
        if s in result.orders:
            order, resid = result.orders[s]
            line += f"  order={order:.3f} fit_residual={resid:.2e}"
        lines.append(line)
    if result.scaling is not None:
        sc = result.scaling
        if sc.degenerate:
            lines.append("displacement scaling: degenerate (no displacement)")
        else:
            lines.append(f"displacement vs tau: exponent={sc.exponent_tau:.3f} "
                         f"(floor {sc.target_tau:.3f}) fit_residual={sc.residual_tau:.2e}")
            lines.append(f"displacement vs W2: exponent={sc.exponent_w2:.3f} "
                         f"(floor {sc.target_w2:.3f}) fit_residual={sc.residual_w2:.2e}")
            lines.append(f"hessian vs tau: beta={sc.beta_hessian:.3f}")
    if result.f2:
        lines.append(f"F2 dissipation: jko={result.f2['jko_dissipation']:.6g} "
                     f"pde={result.f2['pde_dissipation']:.6g} "
                     f"relative_gap={result.f2['relative_gap']:.3e}")
    for name, ok in result.checks.items():
        lines.append(f"{'PASS' if ok else 'FAIL'} {name}")
    names = sorted({r.name for r in result.reports})
    for name in names:
        reps = [r for r in result.reports if r.name == name]
        ok = all(r.satisfied for r in reps)
        worst = min(r.margin for r in reps)
        lines.append(f"{'PASS' if ok else 'FAIL'} {name} ({len(reps)} checks, worst margin {worst:.3e})")
    lines.append("OVERALL " + ("PASS" if result.passed else "FAIL"))
    return "\n".join(lines) + "\n"


def emit_report(result: StudyResult, path) -> dict:
    """Write ``errors.csv``, ``diagnostics.json`` and ``summary.txt`` under ``path``.

    Returns the mapping of artifact names to written paths. ``OSError`` is
    re-raised with the offending path in its message.
    """
    out = Path(path)
    files = {"errors": out / "errors.csv", "diagnostics": out / "diagnostics.json",
             "summary": out / "summary.txt"}
    bundle = {
        "reports": [r.to_dict() for r in result.reports],
        "checks": result.checks,
        "orders": {k: {"order": v[0], "fit_residual": v[1]} for k, v in result.orders.items()},
        "scaling": result.scaling.to_dict() if result.scaling else None,
        "eps": result.eps,
        "f2": result.f2,
        "oracle_gap": result.oracle_gap,
        "passed": result.passed,
        "empty": result.empty,
    }
    try:
        out.mkdir(parents=True, exist_ok=True)
        with open(files["errors"], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(_csv_columns(result))
            for row in error_table(result):
                w.writerow(["%.17g" % v for v in row])
        files["diagnostics"].write_text(json.dumps(dg._jsonable(bundle), indent=2, sort_keys=True) + "\n")
        files["summary"].write_text(_summary(result))
    except OSError as exc:
        raise OSError(f"cannot write study report under {out}: {exc}") from exc
    return files
