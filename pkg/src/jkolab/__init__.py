"""Numerical laboratory for JKO minimizing movements of the 1-D Fokker-Planck equation."""

from .errors import (InsufficientData, InvalidDensity, InvalidValue, JKOLabError,
                     MissingRequired, MonotonicityLoss, NonConvergence, NumericalError,
                     OracleTooCoarse, SmallnessViolated, UnknownFlag, UsageError)
from .fokker_planck import FPSolution, dissipation_F2, dissipation_L2, fp_solve, fp_step
from .functionals import Density, Potential, entropy_J, fisher_Fp, gibbs_density
from .grid import Grid1D, GridFunction, deriv1, deriv2, integrate, sobolev_norm
from .jko import (JKOConfig, JKOStepResult, JKOTrajectory, interpolate_eps, jko_step,
                  run_trajectory)
from .transport import TransportPlan, cdf, optimal_plan, quantile, w2_distance

__version__ = "0.1.0"
