"""
Transient growth of unrolled derivatives
========================================

Differentiating through gradient descent on a least-squares problem. The
forward-mode derivative error first grows before it decays, and the peak
moves later as the problem gets worse conditioned.
"""

import numpy as np

from unrolling import gd_map, run_fpi, StopRule, forward_unroll, reverse_unroll
from unrolling import forward_error_series, reverse_error_series, curse_indices
from unrolling.bench import generate_instance, iteration_count
from unrolling.densela import spectral_extremes_sym

###############################################################################
# One instance per dimension. The parameter is the data itself, packed as
# ``u = vec(A) ++ b``, and the probes are normalized all-ones vectors.

for N in (2, 10, 30):
    p = generate_instance(50, N, seed=(0, N, 0), alpha_kind="optimal")
    T, u = gd_map(p), p.default_u()
    m, L = spectral_extremes_sym(p.A.T @ p.A)
    K = iteration_count(L, m, 1e-3, 1000)

    traj = run_fpi(T, u, np.zeros(N), StopRule(max_iters=K))
    p_u = np.ones(p.dim_u) / np.sqrt(p.dim_u)
    w = np.ones(N) / np.sqrt(N)

    fwd = forward_error_series(forward_unroll(T, traj, p_u), p.solution_jvp(u, p_u))
    rev = reverse_error_series(reverse_unroll(T, traj, w), p.solution_vjp(u, w))
    k_dot, k_bar = curse_indices(fwd, rev)
    print(f"N={N:2d}  K={K:4d}  rho*={(L - m) / (L + m):.4f}  "
          f"peak forward error at k={k_dot} ({fwd[k_dot] / fwd[0]:.3g}x initial), "
          f"best reverse stop at k={k_bar}")

###############################################################################
# A smaller step size slows the iterates down but also tames the transient.

p = generate_instance(50, 30, seed=(0, 30, 0), alpha_kind="suboptimal")
T, u = gd_map(p), p.default_u()
traj = run_fpi(T, u, np.zeros(30), StopRule(max_iters=1000))
p_u = np.ones(p.dim_u) / np.sqrt(p.dim_u)
fwd = forward_error_series(forward_unroll(T, traj, p_u), p.solution_jvp(u, p_u))
print(f"N=30 with alpha = 1/(3L): peak at k={int(np.argmax(fwd))}, "
      f"final error {fwd[-1]:.3g} vs initial {fwd[0]:.3g}")
