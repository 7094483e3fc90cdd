import dataclasses
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jkolab import diagnostics as dg
from jkolab.errors import InsufficientData, MonotonicityLoss, SmallnessViolated
from jkolab.families import make_density, make_potential
from jkolab.functionals import Density, fisher_Fp, gibbs_density
from jkolab.grid import Grid1D, GridFunction
from jkolab.jko import JKOConfig, jko_step, run_trajectory
from jkolab.transport import optimal_plan

from conftest import coefficients, fourier_density

GRID = Grid1D(0, 1, 128)
QUAD = make_potential("quadratic:0.5,4", GRID)
ZERO = make_potential("zero", GRID)
DWELL = make_potential("doublewell:0.5,0.3,2", GRID)


@pytest.fixture(scope="module")
def generic():
    return run_trajectory(make_density("cosine:0.3,1", GRID), QUAD, 0.02, JKOConfig(1e-3))


@pytest.fixture(scope="module")
def at_gibbs():
    return run_trajectory(gibbs_density(QUAD), QUAD, 0.01, JKOConfig(1e-3))


def cos_pair(n):
    g = Grid1D(0, 1, n)
    x = g.nodes
    return (Density.floored(g, 1 + 0.3 * np.cos(np.pi * x)),
            Density.floored(g, 1 + 0.3 * np.cos(2 * np.pi * x)))


class TestReport:
    def test_compare_and_json(self):
        r = dg.InequalityReport.compare("x", 1.0, 1.5, 0.1, tau=1e-3, extra=float("nan"))
        assert r.margin == -0.5 and not r.satisfied
        d = r.to_dict()
        assert d["context"]["extra"] is None
        json.dumps(d, allow_nan=False)

    def test_satisfied_iff_margin_within_tol(self):
        assert dg.InequalityReport.compare("x", 1.0, 1.0 + 1e-9, 1e-8).satisfied


class TestFiveGradients:
    def test_equal_densities(self):
        rho, _ = cos_pair(256)
        r = dg.check_five_gradients(rho, rho, 2.0)
        assert abs(r.lhs) <= 1e-10 and abs(r.rhs) <= 1e-10 and r.satisfied

    @pytest.mark.parametrize("p", [2.0, 3.0])
    def test_cosine_pair(self, p):
        rho, g = cos_pair(1024)
        r = dg.check_five_gradients(rho, g, p)
        assert r.satisfied
        assert abs(r.lhs - r.rhs) <= 1e-3 * (1 + abs(r.lhs))
        assert r.context["interior_remainder"] >= 0
        assert min(r.context["boundary_a"], r.context["boundary_b"]) >= -1e-8

    def test_residual_refines_linearly(self):
        res = [-dg.check_five_gradients(*cos_pair(n), 2.0).margin for n in (256, 512, 1024)]
        assert res[1] <= 0.5 * res[0] * 1.05 and res[2] <= 0.5 * res[1] * 1.05

    def test_nonmonotone_map_rejected(self):
        rho, g = cos_pair(128)
        plan = optimal_plan(rho, g)
        x = rho.grid.nodes
        bad = dataclasses.replace(plan, phi=GridFunction(rho.grid, x * x))
        with pytest.raises(MonotonicityLoss):
            dg.check_five_gradients(rho, g, 2.0, bad)

    @settings(max_examples=15)
    @given(coefficients, coefficients, st.sampled_from([2.0, 3.0]))
    def test_random_pairs(self, c1, c2, p):
        g = Grid1D(0, 1, 512)
        r = dg.check_five_gradients(fourier_density(g, c1), fourier_density(g, c2), p)
        assert r.satisfied, r


class TestStepInequalities:
    def test_flow_interchange_uniform_heat(self):
        st_ = jko_step(make_density("uniform", GRID), ZERO, JKOConfig(1e-3))
        assert abs(dg.check_flow_interchange(st_, ZERO).margin) <= 1e-8

    def test_flow_interchange_strict_for_heat(self):
        st_ = jko_step(make_density("cosine:0.3,1", GRID), ZERO, JKOConfig(1e-3))
        assert dg.check_flow_interchange(st_, ZERO).margin > 0

    def test_flow_interchange_along_trajectory(self, generic):
        assert all(dg.check_flow_interchange(s, QUAD).satisfied for s in generic.steps)

    def test_lp_decay_zero_potential(self):
        st_ = jko_step(make_density("cosine:0.3,1", GRID), ZERO, JKOConfig(1e-3))
        r = dg.check_lp_decay(st_, ZERO, 2.0)
        assert r.context["coefficient"] == 1.0
        h = GRID.h
        assert r.lhs == pytest.approx(h * np.sum(st_.rho_prev.values ** 2))
        assert r.margin > 0

    def test_lp_decay_coefficient(self, generic):
        r = dg.check_lp_decay(generic.steps[0], QUAD, 2.0)
        assert r.context["coefficient"] == pytest.approx(0.992)
        assert all(dg.check_lp_decay(s, QUAD, 2.0).satisfied for s in generic.steps)

    def test_lp_decay_p3(self):
        traj = run_trajectory(make_density("cosine:0.3,1", GRID), QUAD, 0.05, JKOConfig(1e-3))
        assert min(dg.check_lp_decay(s, QUAD, 3.0).margin for s in traj.steps) >= -1e-8

    def test_lp_decay_smallness(self, generic):
        big = dataclasses.replace(generic.steps[0], tau=0.2)
        with pytest.raises(SmallnessViolated):
            dg.check_lp_decay(big, QUAD, 2.0)

    def test_energy_step(self, generic):
        assert all(dg.check_energy_step(s, QUAD).satisfied for s in generic.steps)


class TestTrajectoryChecks:
    def test_telescope_at_gibbs(self, at_gibbs):
        r = dg.check_w2_telescope(at_gibbs, QUAD)
        assert abs(r.lhs) <= 1e-10 and r.rhs <= 1e-10 and r.satisfied

    def test_telescope_generic_and_partial_sums(self, generic):
        r = dg.check_w2_telescope(generic, QUAD)
        assert r.margin >= 0
        partial = np.cumsum([s.w2 ** 2 for s in generic.steps]) / generic.tau
        assert np.all(np.diff(partial) >= 0)
        assert r.lhs - partial[-1] == pytest.approx(r.margin)

    def test_fp_decay_convex(self, generic):
        reps = dg.check_fp_decay(generic, QUAD, 2.0)
        assert len(reps) == generic.N and all(r.satisfied for r in reps)
        F = [fisher_Fp(d, QUAD) for d in generic.densities]
        assert all(b < a for a, b in zip(F, F[1:]))

    def test_fp_decay_gibbs(self, at_gibbs):
        reps = dg.check_fp_decay(at_gibbs, QUAD, 2.0)
        # O(h^2) difference-quotient floor at n = 128
        assert all(r.satisfied and r.lhs <= 1e-6 for r in reps)

    def test_fp_decay_nonconvex(self):
        traj = run_trajectory(make_density("cosine:0.3,2", GRID), DWELL, 0.02, JKOConfig(1e-3))
        assert DWELL.lam < 0
        assert all(r.satisfied for r in dg.check_fp_decay(traj, DWELL, 2.0))

    def test_fp_decay_smallness(self, generic):
        W = make_potential("doublewell:0.5,0.3,5000", GRID)
        with pytest.raises(SmallnessViolated):
            dg.check_fp_decay(generic, W, 2.0)

    def test_maxmin(self, generic, at_gibbs):
        g = dg.check_maxmin(at_gibbs, QUAD)
        assert g.context["band_high"] - g.context["band_low"] <= 1e-8 and g.satisfied
        assert dg.check_maxmin(generic, QUAD).satisfied
        # the band of log rho_k + V contracts step by step
        q = [np.log(d.values) + QUAD.values for d in generic.densities]
        widths = [v.max() - v.min() for v in q]
        assert all(b < a for a, b in zip(widths, widths[1:]))

    def test_f2_jko(self, generic, at_gibbs):
        r = dg.check_f2_dissipation_jko(at_gibbs, QUAD)
        assert abs(r.lhs) <= 1e-7 and abs(r.rhs) <= 1e-7
        r = dg.check_f2_dissipation_jko(generic, QUAD)
        assert r.satisfied and r.context["delta"] == pytest.approx(abs(r.lhs - r.rhs))

    def test_f2_refinement_report(self):
        reps = [dg.InequalityReport("f2_dissipation_jko", 1, 1, 0, 0, True, {"tau": t, "delta": d})
                for t, d in ((1e-3, 0.1), (5e-4, 0.05), (2.5e-4, 0.06))]
        assert not dg.check_f2_refinement(reps).satisfied
        assert dg.check_f2_refinement(reps[:2]).satisfied

    def test_suite(self, generic):
        reps = dg.run_suite(generic, QUAD)
        assert all(r.satisfied for r in reps)
        names = set(dg.worst_margins(reps))
        assert names == {"energy_step", "flow_interchange", "lp_decay", "five_gradients",
                         "fp_decay", "maxmin", "w2_telescope", "f2_dissipation_jko"}


class TestScaling:
    def test_needs_four(self, generic):
        with pytest.raises(InsufficientData):
            dg.fit_displacement_scaling([generic] * 3)

    def test_degenerate_at_gibbs(self):
        trajs = [run_trajectory(gibbs_density(QUAD), QUAD, 0.01, JKOConfig(t))
                 for t in (1e-2, 5e-3, 2.5e-3, 1.25e-3)]
        rep = dg.fit_displacement_scaling(trajs)
        assert rep.degenerate and rep.to_dict()["exponent_tau"] is None

    def test_smooth_start(self):
        rho0 = make_density("cosine:0.3,1", GRID)
        taus = (1e-2, 5e-3, 2.5e-3, 1.25e-3)
        rep = dg.fit_displacement_scaling([run_trajectory(rho0, QUAD, 0.02, JKOConfig(t)) for t in taus])
        assert rep.satisfied and not rep.degenerate
        assert rep.exponent_tau >= 0.5
        assert rep.exponent_w2 >= 2 / 3 - 0.1
        assert all(b < a for a, b in zip(rep.hessian, rep.hessian[1:]))
        assert np.isfinite(rep.residual_tau)
