"""Energy-conserving line integral methods LIM(k1, k2, s) for Poisson systems
y' = S(y) grad H(y), with gyrocenter test models and an experiment harness."""

from .legendre import (MethodTableau, ParameterError, Quadrature, build_tableau, gauss_legendre,
                       legendre_eval, legendre_integral, xi, xs_matrix)
from .poisson import (ModelDomainError, PoissonSystem, eval_f, eval_f_batch, jacobian_f,
                      linear_system)
from .gyrocenter import (BANANA_Y0, DIPOLE_ELECTRIC_Y0, DIPOLE_Y0, TRANSIT_Y0, DipoleField,
                         ElectricPotential, GyrocenterModel, QuadraticPotential, SingularityError,
                         TokamakField, cylindrical_coords, dipole_electric_model, dipole_model,
                         quadratic_potential, tokamak_model)
from .lim import StepResult, advance, dense_output, fixed_point_map, residual, stage_states
from .solvers import (Divergence, NonConvergence, SingularMatrix, SolveOutcome, SolverConfig,
                      SolverError, solve, solve_blended, solve_fixed_point,
                      solve_simplified_newton)
from .harness import (Problem, StepFailed, SweepReport, TrajectoryRecord, convergence_table,
                      get_problem, hamiltonian_error_table, integrate, solver_robustness_table,
                      spectral_run)

__version__ = "0.1.0"
