"""Pseudo-spectral solver for the multipoint nonlocal wave equation

    u_tt - a Lap u + b*u = Lap[g * f(u)],
    u(0) = phi + sum alpha_k u(lambda_k),   u_t(0) = psi + sum beta_k u_t(lambda_k).
"""
from .energy import (EnergyRecord, apply_B, apply_B_inverse, check_lemma42_regularity,
                     energy_drift_monitor, potential_primitive)
from .errors import NlwaveError
from .kernels import KernelSpec, builtin_kernel, check_decay_class, eta
from .linear import (MultipointSpec, Trajectory, check_wellposed, d0, evolve_mode, mode_coefficients,
                     multipoint_residuals, solve_linear)
from .nonlinear import (FixedPointConfig, NonlinearitySpec, builtin_nonlinearity, choose_T,
                        continue_solution, solve_global_smalldata, solve_local)
from .spectral import Field, Grid, apply_multiplier, norm_hsp, norm_lp

__all__ = [
    "EnergyRecord", "apply_B", "apply_B_inverse", "check_lemma42_regularity",
    "energy_drift_monitor", "potential_primitive", "NlwaveError", "KernelSpec", "builtin_kernel",
    "check_decay_class", "eta", "MultipointSpec", "Trajectory", "check_wellposed", "d0", "evolve_mode",
    "mode_coefficients", "multipoint_residuals", "solve_linear", "FixedPointConfig", "NonlinearitySpec",
    "builtin_nonlinearity", "choose_T", "continue_solution", "solve_global_smalldata", "solve_local",
    "Field", "Grid", "apply_multiplier", "norm_hsp", "norm_lp",
]
