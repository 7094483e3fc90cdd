"""
Command-line entry point.

Subcommands
    step    one JKO step from rho0, written to step.json
    run     a trajectory up to T, written to trajectory.csv
    check   a trajectory plus every discrete inequality (diagnostics.json)
    study   a step-size refinement study against the reference PDE solver

Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 a diagnostic
failed, 4 I/O failure. Every run writes effective-config.json next to its
outputs.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

from . import diagnostics as dg
from .errors import (InvalidValue, MissingRequired, NumericalError, UnknownFlag,
                     UsageError)
from .families import make_density, make_potential
from .fokker_planck import f2_terms
from .functionals import DEFAULT_FLOOR, entropy_J
from .grid import Grid1D
from .jko import JKOConfig, jko_step, run_trajectory, steps_for
from .study import StudyConfig, emit_report, run_study

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_DIAGNOSTICS, EXIT_IO = 0, 1, 2, 3, 4
COMMANDS = ("step", "run", "study", "check")

log = logging.getLogger("jkolab")


@dataclass(frozen=True)
class RunConfig:
    command: str
    a: float = 0.0
    b: float = 1.0
    n: int = 256
    m: int | None = None
    V: str = "zero"
    rho0: str = "uniform"
    tau: float | None = None
    tau_list: tuple | None = None
    T: float | None = None
    newton_tol: float = 1e-10
    floor: float = DEFAULT_FLOOR
    dt_ref: float | None = None
    out: str = "jkolab-out"
    seed: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.tau_list is not None:
            d["tau_list"] = list(self.tau_list)
        return d


_FIELDS = {f for f in RunConfig.__dataclass_fields__ if f != "command"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InvalidValue("arguments", "valid flags and values", message)


def _tau_list(text):
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="jkolab", description=__doc__.split("\n\n")[0].strip())
    p.add_argument("command", choices=COMMANDS)
    # defaults stay None so a config file can fill them
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--V")
    p.add_argument("--rho0")
    p.add_argument("--tau", type=float)
    p.add_argument("--tau-list", type=_tau_list, dest="tau_list")
    p.add_argument("--T", type=float)
    p.add_argument("--newton-tol", type=float, dest="newton_tol")
    p.add_argument("--floor", type=float)
    p.add_argument("--dt-ref", type=float, dest="dt_ref")
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--json-config", dest="json_config")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _read_config_file(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise InvalidValue("json-config", "an existing JSON file", str(p))
    try:
        data = json.loads(p.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidValue("json-config", "a JSON object", f"{p}: {exc}") from None
    if not isinstance(data, dict):
        raise InvalidValue("json-config", "a JSON object", type(data).__name__)
    out = {}
    for key, value in data.items():
        name = key.replace("-", "_")
        if name not in _FIELDS:
            raise UnknownFlag(key, "one of " + ", ".join(sorted(_FIELDS)), f"in {p}")
        if name == "tau_list" and value is not None:
            value = _tau_list(value) if isinstance(value, str) else tuple(float(t) for t in value)
        out[name] = value
    return out


def _validate(cfg: RunConfig) -> None:
    if not cfg.b > cfg.a:
        raise InvalidValue("b", "a value greater than a", f"a={cfg.a}, b={cfg.b}")
    if cfg.n < 8:
        raise InvalidValue("n", "an integer >= 8", str(cfg.n))
    if cfg.m is not None and cfg.m < 8:
        raise InvalidValue("m", "an integer >= 8", str(cfg.m))
    for name in ("newton_tol", "floor"):
        if not getattr(cfg, name) > 0:
            raise InvalidValue(name, "a positive number", str(getattr(cfg, name)))
    if cfg.tau is not None and not cfg.tau > 0:
        raise InvalidValue("tau", "a positive step size", str(cfg.tau))
    if cfg.T is not None and not cfg.T > 0:
        raise InvalidValue("T", "a positive horizon", str(cfg.T))
    if cfg.dt_ref is not None and not cfg.dt_ref > 0:
        raise InvalidValue("dt-ref", "a positive step size", str(cfg.dt_ref))

    need = {"step": ("tau",), "run": ("tau", "T"), "check": ("tau", "T"),
            "study": ("tau_list", "T")}[cfg.command]
    for name in need:
        if getattr(cfg, name) is None:
            raise MissingRequired(name.replace("_", "-"), f"a value for '{cfg.command}'")
    if cfg.command in ("run", "check"):
        _check_divides(cfg.T, (cfg.tau,), "tau")
    if cfg.command == "study":
        if any(not t > 0 for t in cfg.tau_list):
            raise InvalidValue("tau-list", "positive step sizes", str(cfg.tau_list))
        _check_divides(cfg.T, cfg.tau_list, "tau-list")

    grid = Grid1D(cfg.a, cfg.b, cfg.n)
    V = make_potential(cfg.V, grid)
    make_density(cfg.rho0, grid, V, cfg.floor)


def _check_divides(T, taus, field):
    for tau in taus:
        try:
            steps_for(T, tau)
        except ValueError:
            raise InvalidValue(field, f"step sizes dividing T={T:g}", f"{tau:g}") from None


def parse_config(argv=None) -> RunConfig:
    """Flags override config-file values, which override defaults.

    Raises
    ------
    UnknownFlag, InvalidValue, MissingRequired
        Each names the offending field and the expected form.
    """
    parser = build_parser()
    ns, extra = parser.parse_known_args(argv)
    if extra:
        raise UnknownFlag(extra[0], "one of the documented flags (see --help)")
    values = _read_config_file(ns.json_config) if ns.json_config else {}
    for name in _FIELDS:
        flag = getattr(ns, name, None)
        if flag is not None:
            values[name] = flag
    try:
        cfg = RunConfig(command=ns.command, **values)
    except TypeError as exc:
        raise InvalidValue("json-config", "known keys with valid values", str(exc)) from None
    _validate(cfg)
    return cfg


def _setup(cfg: RunConfig):
    grid = Grid1D(cfg.a, cfg.b, cfg.n)
    V = make_potential(cfg.V, grid)
    rho0 = make_density(cfg.rho0, grid, V, cfg.floor)
    return grid, V, rho0


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(dg._jsonable(obj), indent=2, sort_keys=True) + "\n")


def _step(cfg, out):
    _, V, rho0 = _setup(cfg)
    st = jko_step(rho0, V, JKOConfig(cfg.tau, newton_tol=cfg.newton_tol, m=cfg.m))
    _write_json(out / "step.json", st.to_dict())
    print(f"step: W2={st.w2:.6e} J {st.J_prev:.6f} -> {st.J_next:.6f} "
          f"newton={st.newton_iters} optimality_residual={st.optimality_residual:.3e}")
    return EXIT_OK


def _trajectory(cfg):
    _, V, rho0 = _setup(cfg)
    traj = run_trajectory(rho0, V, cfg.T, JKOConfig(cfg.tau, newton_tol=cfg.newton_tol, m=cfg.m))
    return V, traj


def _run(cfg, out):
    V, traj = _trajectory(cfg)
    with open(out / "trajectory.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "J", "F2", "w2", "newton_iters"])
        for k, d in enumerate(traj.densities):
            w2, iters = (traj.steps[k - 1].w2, traj.steps[k - 1].newton_iters) if k else (0.0, 0)
            w.writerow(["%.17g" % (k * traj.tau), "%.17g" % entropy_J(d, V),
                        "%.17g" % f2_terms(d.values, V)[0], "%.17g" % w2, iters])
    print(f"run: {traj.N} steps, J {traj.steps[0].J_prev:.6f} -> {traj.steps[-1].J_next:.6f}")
    return EXIT_OK


def _check(cfg, out):
    V, traj = _trajectory(cfg)
    reports = dg.run_suite(traj, V)
    ok = all(r.satisfied for r in reports)
    _write_json(out / "diagnostics.json", {"reports": [r.to_dict() for r in reports], "passed": ok})
    worst = dg.worst_margins(reports)
    lines = []
    for name, margin in worst.items():
        good = all(r.satisfied for r in reports if r.name == name)
        lines.append(f"{'PASS' if good else 'FAIL'} {name} worst margin {margin:.3e}")
    lines.append("OVERALL " + ("PASS" if ok else "FAIL"))
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK if ok else EXIT_DIAGNOSTICS


def _study(cfg, out):
    scfg = StudyConfig(rho0=cfg.rho0, V=cfg.V, T=cfg.T, taus=cfg.tau_list, n=cfg.n, m=cfg.m,
                       a=cfg.a, b=cfg.b, dt_ref=cfg.dt_ref, floor=cfg.floor,
                       newton_tol=cfg.newton_tol)
    result = run_study(scfg)
    files = emit_report(result, out)
    print(files["summary"].read_text(), end="")
    return EXIT_OK if result.passed else EXIT_DIAGNOSTICS


def dispatch(cfg: RunConfig) -> int:
    """Run the selected pipeline and return its exit status."""
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "effective-config.json", cfg.to_dict())
    except OSError as exc:
        print(f"error: cannot write to {out}: {exc}", file=sys.stderr)
        return EXIT_IO
    handler = {"step": _step, "run": _run, "check": _check, "study": _study}[cfg.command]
    try:
        return handler(cfg, out)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
    except UsageError as exc:
        print(f"usage error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_USAGE
    verbose = "-v" in (argv or sys.argv[1:]) or "--verbose" in (argv or sys.argv[1:])
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return dispatch(cfg)


if __name__ == "__main__":
    sys.exit(main())
