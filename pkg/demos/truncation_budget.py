"""
Truncation at a fixed budget
============================

A derivative step costs about ``omega`` plain iterations. Skipping the first
``T`` derivative steps buys ``omega * T`` extra plain iterations, so the
derivative recursion starts later, from a better iterate.
"""

import numpy as np

from unrolling import make_plan, gd_map, run_fpi, StopRule, Trajectory
from unrolling import forward_unroll, forward_error_series
from unrolling.bench import generate_instance, iteration_count
from unrolling.densela import spectral_extremes_sym

plan = make_plan(500, 100, 3)
print(f"K=500, T=100, omega=3 -> K'={plan.K_prime}, T'={plan.T_prime}, "
      f"derivative steps={plan.derivative_iters}, cost {plan.cost:.0f} of {plan.budget:.0f}")

###############################################################################
# Same instance, several truncation fractions, all at the same cost.

p = generate_instance(50, 30, seed=(0, 30, 1), alpha_kind="optimal")
T, u = gd_map(p), p.default_u()
m, L = spectral_extremes_sym(p.A.T @ p.A)
K = iteration_count(L, m, 1e-3, 1000)
p_u = np.ones(p.dim_u) / np.sqrt(p.dim_u)
oracle = p.solution_jvp(u, p_u)

longest = make_plan(K, int(0.8 * K), 3.0)
traj = run_fpi(T, u, np.zeros(30), StopRule(max_iters=longest.K_prime))

print(" fraction    T'   peak error   final error")
for frac in (0.0, 0.2, 0.4, 0.6, 0.8):
    plan = make_plan(K, int(frac * K), 3.0)
    # the tape is shared; a plan only looks at its first K' + 1 entries
    sub = Trajectory(traj.iterates[:plan.K_prime + 1], u, plan.K_prime, traj.stop_reason)
    errs = forward_error_series(forward_unroll(T, sub, p_u, late_start=plan.T_prime), oracle)
    print(f"   {frac:.1f}   {plan.T_prime:5d}   {errs.max():10.4g}   {errs[-1]:10.4g}")
