import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from jkolab.families import make_density, make_potential
from jkolab.functionals import Density
from jkolab.grid import Grid1D

settings.register_profile("jkolab", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("jkolab")


@pytest.fixture
def unit_grid():
    return Grid1D(0.0, 1.0, 256)


@pytest.fixture
def quad_V(unit_grid):
    return make_potential("quadratic:0.5,4", unit_grid)


@pytest.fixture
def cosine_rho(unit_grid):
    return make_density("cosine:0.3,1", unit_grid)


def fourier_density(grid, coeffs):
    """Positive density ``1 + sum_k c_k cos(k pi x)`` scaled to stay above 0.2."""
    y = (grid.nodes - grid.a) / grid.length
    v = np.ones(grid.n)
    c = np.asarray(coeffs, dtype=float)
    if np.abs(c).sum() > 0.8:
        c = c * 0.8 / np.abs(c).sum()
    for k, ck in enumerate(c, start=1):
        v += ck * np.cos(k * np.pi * y)
    return Density.from_values(grid, v)


coefficients = st.lists(st.floats(-0.4, 0.4, allow_nan=False), min_size=1, max_size=4)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE = []


def record(number, ok, detail):
    line = f"ACCEPTANCE {number:>2} {'PASS' if ok else 'FAIL'}: {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
