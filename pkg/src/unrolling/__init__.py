"""Unrolled differentiation of fixed-point iterations.

Forward and reverse mode derivatives through recorded fixed-point runs,
error bounds that explain their transient growth, truncation under a fixed
compute budget and warm-started bilevel optimization.
"""

from .analysis import (BoundConstants, constants_for_ridge, estimate_constants,
                       forward_bound_series, gamma_residual_check, late_start_bound_series)
from .bilevel import (BilevelConfig, BilevelTrace, QuadraticLoss, run_bilevel,
                      warm_start_truncation_report)
from .densela import matvec, solve_linear, spectral_extremes_sym, spectral_norm
from .fixmap import (AffineMap, FixedPointProblem, GradientDescentMap, HeavyBallMap, RidgeLS,
                     ShiftedQuadratic, gd_map, heavy_ball_map, ridge_solution_jacobian_oracle,
                     ridge_solution_oracle)
from .planner import (BudgetPlan, TruncationObjective, make_plan, objective_h,
                      objective_h_derivatives, optimal_T_discrete, optimal_T_relaxed)
from .solver import StopReason, StopRule, Trajectory, iterate_errors, run_fpi
from .unrollad import (ForwardCarrier, ReverseSweep, curse_indices, forward_error_series,
                       forward_unroll, reverse_error_series, reverse_unroll)

__version__ = "0.1.0"
