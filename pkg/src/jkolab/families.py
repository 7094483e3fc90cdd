"""
Named families of potentials and initial densities, addressed by short
spec strings such as ``quadratic:0.5,4`` or ``cosine:0.3,1``.

Potentials
    ``zero`` | ``quadratic:center,strength`` (``strength * (x - center)^2``) |
    ``doublewell:center,width,strength`` (``strength * ((x-center)^2 - width^2)^2``) |
    ``file:PATH``
Initial densities
    ``uniform`` | ``cosine:amplitude,frequency`` (``1 + A cos(k pi (x-a)/(b-a))``) |
    ``gibbs`` | ``gibbscos:amplitude,frequency`` (``exp(-V) (1 + A cos(...))``, which
    satisfies the no-flux condition) | ``file:PATH``

Tabulated files are two-column CSV ``x,value`` resampled to the grid by
linear interpolation.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import InvalidValue
from .functionals import DEFAULT_FLOOR, Density, Potential, gibbs_density
from .grid import Grid1D

POTENTIALS = ("zero", "quadratic", "doublewell", "file")
DENSITIES = ("uniform", "cosine", "gibbs", "gibbscos", "file")


def split_spec(spec: str, field: str):
    name, _, rest = spec.partition(":")
    name = name.strip().lower()
    if name == "file":
        return name, [rest]
    params = []
    if rest:
        try:
            params = [float(p) for p in rest.split(",")]
        except ValueError:
            raise InvalidValue(field, "comma-separated numbers after ':'", spec) from None
    return name, params


def read_table(path, field: str):
    p = Path(path)
    if not p.is_file():
        raise InvalidValue(field, "an existing two-column CSV file", str(p))
    try:
        data = np.loadtxt(p, delimiter=",", comments="#", ndmin=2)
    except ValueError as exc:
        raise InvalidValue(field, "numeric two-column CSV x,value", str(exc)) from None
    if data.shape[1] != 2 or data.shape[0] < 2:
        raise InvalidValue(field, "at least two rows of x,value", str(p))
    order = np.argsort(data[:, 0])
    return data[order, 0], data[order, 1]


def quadratic(center: float, strength: float):
    def fn(x, nu=0):
        if nu == 0:
            return strength * (x - center) ** 2
        if nu == 1:
            return 2.0 * strength * (x - center)
        return 2.0 * strength * np.ones_like(x)
    return fn


def doublewell(center: float, width: float, strength: float):
    def fn(x, nu=0):
        y = x - center
        if nu == 0:
            return strength * (y * y - width * width) ** 2
        if nu == 1:
            return 4.0 * strength * y * (y * y - width * width)
        return strength * (12.0 * y * y - 4.0 * width * width)
    return fn


def make_potential(spec: str, grid: Grid1D) -> Potential:
    name, params = split_spec(spec, "V")
    if name == "zero" and not params:
        return Potential.from_function(grid, lambda x, nu=0: np.zeros_like(x))
    if name == "quadratic" and len(params) == 2:
        return Potential.from_function(grid, quadratic(*params))
    if name == "doublewell" and len(params) == 3:
        return Potential.from_function(grid, doublewell(*params))
    if name == "file":
        xs, vs = read_table(params[0], "V")
        return Potential.from_values(grid, np.interp(grid.nodes, xs, vs))
    raise InvalidValue("V", "zero | quadratic:c,s | doublewell:c,w,s | file:PATH", spec)


def make_density(spec: str, grid: Grid1D, V: Potential | None = None,
                 floor: float = DEFAULT_FLOOR) -> Density:
    name, params = split_spec(spec, "rho0")
    x = grid.nodes
    if name == "uniform" and not params:
        return Density.from_values(grid, np.ones(grid.n), floor)
    if name in ("cosine", "gibbscos") and len(params) == 2:
        amp, freq = params
        if not abs(amp) < 1:
            raise InvalidValue("rho0", "cosine amplitude with |A| < 1", spec)
        y = (x - grid.a) / grid.length
        vals = 1.0 + amp * np.cos(freq * np.pi * y)
        if name == "gibbscos":
            if V is None:
                raise InvalidValue("rho0", "a potential to build the perturbed Gibbs density", spec)
            vals = vals * np.exp(-(V.values - V.values.min()))
        return Density.from_values(grid, vals, floor)
    if name == "gibbs" and not params:
        if V is None:
            raise InvalidValue("rho0", "a potential to build the Gibbs density", spec)
        return gibbs_density(V, floor)
    if name == "file":
        xs, vs = read_table(params[0], "rho0")
        if vs.min() <= 0:
            raise InvalidValue("rho0", "strictly positive tabulated density", params[0])
        return Density.from_values(grid, np.interp(x, xs, vs), floor)
    raise InvalidValue("rho0", "uniform | cosine:A,k | gibbs | gibbscos:A,k | file:PATH", spec)
