import dataclasses
import json

import numpy as np
import pytest

from jkolab import study
from jkolab.errors import InvalidValue, OracleTooCoarse
from jkolab.study import StudyConfig, emit_report, error_table, read_error_csv, run_study

TAUS = (5e-3, 2.5e-3, 1.25e-3, 6.25e-4)


@pytest.fixture(scope="module")
def heat_study():
    return run_study(StudyConfig("cosine:0.3,1", "zero", 0.05, TAUS, n=256))


def test_config_validation():
    with pytest.raises(InvalidValue):
        StudyConfig("uniform", "zero", 0.05, (3e-3,))
    with pytest.raises(InvalidValue):
        StudyConfig("uniform", "zero", 0.05, (5e-3,), norms=("L2H3",))
    cfg = StudyConfig("uniform", "zero", 0.05, (1.25e-3, 5e-3))
    assert cfg.taus == (5e-3, 1.25e-3)
    assert cfg.reference_dt == pytest.approx(1.25e-3 / 64)


def test_gibbs_start_has_no_error():
    res = run_study(StudyConfig("gibbs", "quadratic:0.5,4", 0.01, (2e-3, 1e-3), n=64))
    assert all(e <= 1e-6 for errs in res.errors.values() for e in errs)
    assert all(e <= 1e-6 for e in res.log_h2)
    assert res.passed, res.failures()


def test_heat_errors_decrease(heat_study):
    for s in ("L2L2", "L2H1", "L2H2"):
        errs = heat_study.errors[s]
        assert all(b < a for a, b in zip(errs, errs[1:])), s
    assert heat_study.orders["L2L2"][0] >= 0.8
    assert heat_study.passed, heat_study.failures()


def test_eps_interpolation_checks(heat_study):
    assert len(heat_study.eps) == 3
    for e in heat_study.eps:
        assert abs(e["distance"] - e["closed_form"]) <= 1e-8
    ratios = [e["ratio"] for e in heat_study.eps]
    assert max(ratios) / min(ratios) - 1 <= 0.05


def test_oracle_too_coarse():
    with pytest.raises(OracleTooCoarse):
        run_study(StudyConfig("cosine:0.3,1", "zero", 0.01, (2e-3, 1e-3), n=64, dt_ref=5e-4))


def test_oracle_not_dominant(monkeypatch):
    # the reference at dt_ref is corrupted so that halving dt_ref moves it a lot
    real = study.fp_solve

    def corrupted(rho0, V, T, dt):
        sol = real(rho0, V, T, dt)
        if dt == 5e-5:
            bump = 1e-3 * np.cos(3 * np.pi * sol.grid.nodes)
            sol = dataclasses.replace(sol, snapshots=sol.snapshots + bump)
        return sol

    monkeypatch.setattr(study, "fp_solve", corrupted)
    with pytest.raises(OracleTooCoarse, match="10%"):
        run_study(StudyConfig("cosine:0.3,1", "zero", 0.01, (1e-3, 5e-4), n=64, dt_ref=5e-5))


def test_empty_study(tmp_path):
    res = run_study(StudyConfig("uniform", "zero", 0.05, ()))
    files = emit_report(res, tmp_path)
    assert files["errors"].read_text().strip().count("\n") == 0
    assert "EMPTY" in files["summary"].read_text()
    assert json.loads(files["diagnostics"].read_text())["empty"] is True


def test_report_shape_and_round_trip(heat_study, tmp_path):
    files = emit_report(heat_study, tmp_path)
    header, rows = read_error_csv(files["errors"])
    assert header[:5] == ["tau", "e_L2L2", "e_L2H1", "e_L2H2", "e_logH2"]
    assert any(h.startswith("margin_") for h in header)
    assert len(rows) == 4 and all(len(r) == len(header) for r in rows)
    table = error_table(heat_study)
    assert all(np.array_equal(np.array(a), np.array(b), equal_nan=True) for a, b in zip(rows, table))
    summary = files["summary"].read_text()
    assert "order=" in summary and "OVERALL PASS" in summary
    bundle = json.loads(files["diagnostics"].read_text())
    rec = bundle["reports"][0]
    assert set(rec) == {"name", "lhs", "rhs", "margin", "tol", "satisfied", "context"}


def test_report_io_error_names_path(heat_study, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError, match=str(blocker)):
        emit_report(heat_study, blocker / "sub")


def test_deterministic_output(tmp_path):
    cfg = StudyConfig("cosine:0.3,1", "quadratic:0.5,4", 0.01, (2e-3, 1e-3), n=64)
    a = emit_report(run_study(cfg), tmp_path / "a")
    b = emit_report(run_study(cfg), tmp_path / "b")
    for key in a:
        assert a[key].read_bytes() == b[key].read_bytes()
