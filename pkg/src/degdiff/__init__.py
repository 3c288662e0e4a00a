"""Solver for u_t = H(u - uc)(lap u + f) above an obstacle, with a reference
obstacle-problem solver, diagnostics and a catalog of experiments."""
from ._accel import BACKEND
from .grid import Grid1D, Grid2D, build_grid_1d, build_grid_2d, laplacian_1d, laplacian_2d, sample
from .switch import EXACT, SwitchVariant, eta, heaviside_exact, parse_switch, smoothed, switch_field
from .scheme import ProblemSpec, RunResult, SchemeConfig, run, step, stopped
from .reference import asymptotic_solution, pl_solve, run_reference

__version__ = "0.1.0"
