"""Numerical toolkit for additive stable processes and their local times."""

from .model import (ExistenceError, ModelParams, TheoreticalConstants,
                    ldp_rate_constant, lil_constant, psi, q, q_function,
                    rho_upper_bound)
from .stablesim import (SheetSample, TimeGrid, load_sheet, sample_increment,
                        save_sheet, simulate_sheet, stream_generator)
from .localtime import (LocalTimeField, Mollifier, OutOfGridError, SpatialGrid,
                        mollified_local_time, occupation_histogram,
                        sup_local_time)
from .moments import (MomentEstimate, exp_time_moment_mc,
                      exp_time_moment_quadrature, exp_time_moment_sim,
                      moment_growth_diagnostic, perm_prefix_sum_dp,
                      perm_prefix_sum_naive)
from .variational import (GridFunction, LatticeModel, UniformGrid,
                          VariationalSolution, discrete_moment_bruteforce,
                          m_psi_from_rho, rho_lower_bound_pair, rho_m_trend,
                          solve_m_psi, solve_rho, solve_rho_lattice,
                          solve_rho_m)
from .experiments import (IdentityReport, LilTrace, ScalingReport, TailFit,
                          intersection_identity_check, lil_tracker,
                          sample_field_statistics, scaling_check, tail_ldp_fit)

__version__ = "0.1.0"
