"""Classical solvers used as independent references for the networks."""
from .grid import Grid1D, bs_grid_solver, btcs_heat, ftcs_heat, thomas
from .mc import McConfig, OuPaths, feynman_kac_mc, ou_simulate
from .mfg_grid import MfgGridResult, mfg_grid_solver
from .ode import ConvergenceError, euler_explicit, euler_implicit
