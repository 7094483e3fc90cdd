import numpy as np
import pytest
from scipy.integrate import trapezoid

from jkolab.families import make_density, make_potential
from jkolab.fokker_planck import (dissipation_F2, dissipation_L2, f2_balance, fp_solve, fp_step,
                                  generator)
from jkolab.functionals import Density, entropy_J, gibbs_density
from jkolab.grid import Grid1D


def heat_solution(n, dt, A=0.5, T=0.1):
    g = Grid1D(0, 1, n)
    Z = make_potential("zero", g)
    rho0 = Density.from_values(g, 1 + A * np.cos(np.pi * g.nodes), normalize=False)
    return fp_solve(rho0, Z, T, dt), 1 + A * np.exp(-np.pi ** 2 * T) * np.cos(np.pi * g.nodes)


def test_generator_conserves_mass(quad_V):
    L = generator(quad_V)
    assert np.abs(np.asarray(L.sum(axis=0))).max() <= 1e-8 * abs(L).max()


def test_gibbs_is_steady(quad_V):
    rho = gibbs_density(quad_V)
    assert np.abs(fp_step(rho, quad_V, 1e-3).values - rho.values).max() <= 1e-10
    assert np.abs(generator(quad_V) @ rho.values).max() <= 1e-8


def test_uniform_heat_exact():
    g = Grid1D(0, 1, 64)
    out = fp_step(make_density("uniform", g), make_potential("zero", g), 1e-2)
    assert np.array_equal(out.values, np.ones(64)) or np.abs(out.values - 1).max() <= 1e-14


def test_single_mode_decay():
    g = Grid1D(0, 1, 512)
    mode = np.cos(np.pi * g.nodes)
    rho = Density.from_values(g, 1 + 0.5 * mode, normalize=False)
    out = fp_step(rho, make_potential("zero", g), 1e-4)
    amp = (out.values - 1) @ mode / (mode @ mode) / 0.5
    assert amp == pytest.approx(1 / (1 + np.pi ** 2 * 1e-4), abs=1e-4)


def test_rejects_nonpositive_dt(cosine_rho, quad_V):
    with pytest.raises(ValueError):
        fp_step(cosine_rho, quad_V, 0.0)


def test_heat_closed_form():
    sol, exact = heat_solution(512, 1e-5)
    assert np.abs(sol.snapshots[-1] - exact).max() <= 5e-4
    assert np.abs(sol.masses() - 1).max() <= 1e-12


def test_time_and_space_orders():
    dts = [4e-4, 2e-4, 1e-4, 5e-5]
    e_dt = [np.abs(s.snapshots[-1] - ex).max() for s, ex in (heat_solution(512, dt) for dt in dts)]
    assert np.polyfit(np.log(dts), np.log(e_dt), 1)[0] >= 0.9
    ns = [16, 32, 64]
    e_h = [np.abs(s.snapshots[-1] - ex).max() for s, ex in (heat_solution(n, 2e-6) for n in ns)]
    assert -np.polyfit(np.log(ns), np.log(e_h), 1)[0] >= 1.9


def test_relaxes_to_gibbs_with_decreasing_J(quad_V, cosine_rho):
    sol = fp_solve(cosine_rho, quad_V, 1.0, 1e-2)
    J = [entropy_J(sol.density(j), quad_V) for j in range(len(sol.times))]
    assert all(b <= a + 1e-14 for a, b in zip(J, J[1:]))
    gap = sol.snapshots[-1] - gibbs_density(quad_V).values
    assert np.sqrt(quad_V.grid.h * np.sum(gap ** 2)) <= 1e-3
    assert sol.snapshots.min() >= cosine_rho.floor


def test_snapshot_cadence_and_dense_output(quad_V, cosine_rho):
    sol = fp_solve(cosine_rho, quad_V, 0.01, 1e-3, snapshot_every=4)
    assert np.allclose(sol.times, [0, 4e-3, 8e-3, 1e-2])
    assert np.array_equal(sol.at(4e-3), sol.snapshots[1])
    assert np.allclose(sol.at(6e-3), 0.5 * (sol.snapshots[1] + sol.snapshots[2]))
    assert np.array_equal(sol.at(1.0), sol.snapshots[-1])
    with pytest.raises(ValueError):
        fp_solve(cosine_rho, quad_V, 0.01, 3e-3)


class TestDissipation:
    def test_steady_state(self, quad_V):
        sol = fp_solve(gibbs_density(quad_V), quad_V, 0.01, 1e-3)
        assert dissipation_L2(sol) <= 1e-10
        assert dissipation_F2(sol) <= 1e-8
        assert abs(f2_balance(sol)["dissipation"]) <= 1e-8

    def test_l2_identity_heat(self):
        fine, _ = heat_solution(512, 1e-5)
        coarse, _ = heat_solution(512, 2e-5)
        assert dissipation_L2(fine) <= 1e-3
        assert dissipation_L2(fine) <= 0.55 * dissipation_L2(coarse)

    def test_l2_identity_direct_form(self):
        sol, _ = heat_solution(256, 1e-4, T=0.01)
        h, s = sol.grid.h, sol.snapshots
        # with V = 0 the flux form is a sum of squared face differences
        rate = [np.sum(np.diff(r) ** 2) / h for r in s]
        lhs = h * np.sum(s[-1] ** 2) - h * np.sum(s[0] ** 2)
        assert dissipation_L2(sol) == pytest.approx(abs(lhs + 2 * trapezoid(rate, sol.times)), abs=1e-15)

    def test_f2_identity_refines(self):
        res = [dissipation_F2(heat_solution(n, dt, A=0.1)[0])
               for n, dt in ((256, 2e-5), (512, 1e-5), (1024, 5e-6))]
        assert res[1] <= 5e-3
        assert res[1] <= 0.5 * res[0] and res[2] <= 0.5 * res[1]
