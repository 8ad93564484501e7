"""
Choosing the truncation index
=============================

Minimizing the late-start bound over ``T`` is a one-dimensional convex
problem. Brute force over integers and bisection on the derivative agree.
"""

import numpy as np

from unrolling import TruncationObjective, objective_h, optimal_T_discrete, optimal_T_relaxed

for rho in (0.9, 0.99, 0.999):
    obj = TruncationObjective.from_bound(rho, K=1000, fwd0=1.0, gamma=1.0, eps0=1.0, omega=3.0)
    T_star, h_star = optimal_T_discrete(obj)
    T_hat = optimal_T_relaxed(obj)
    print(f"rho={rho}: T*={T_star} (relaxed {T_hat:.3f}), "
          f"bound {h_star:.3g} vs {objective_h(obj, 0):.3g} without truncation")

# a tiny bound curve, coarse enough to read
obj = TruncationObjective.from_bound(0.99, K=400, fwd0=1.0, gamma=1.0, eps0=1.0, omega=3.0)
for T in np.linspace(0, 400, 9):
    print(f"T={T:5.0f}  h={objective_h(obj, T):.4g}")
