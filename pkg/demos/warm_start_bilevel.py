"""
Warm-started bilevel optimization
=================================

Tuning a ridge weight on validation data. Each outer round solves the inner
problem by gradient descent and back-propagates through it. Starting each
inner solve from the previous solution needs far fewer inner iterations.
"""

import numpy as np

from unrolling import BilevelConfig, run_bilevel, warm_start_truncation_report
from unrolling.bench import ridge_bilevel_problem

T, loss, objective = ridge_bilevel_problem(dim=10, seed=0)
base = dict(R=20, eps=1e-8, step_sizes=1e-3, x0=np.zeros(10), u0=np.array([1.0]))

warm = run_bilevel(T, loss, BilevelConfig(warm_start=True, **base))
cold = run_bilevel(T, loss, BilevelConfig(warm_start=False, **base))

print(warm_start_truncation_report(warm, cold).summary())
print()
print(" r   K warm  K cold   loss")
for r, (a, b) in enumerate(zip(warm.rounds, cold.rounds)):
    print(f"{r:2d}  {a.K:6d}  {b.K:6d}   {a.loss:.6f}")
print(f"ridge weight: {base['u0'][0]} -> {warm.u_final[0]:.6f}")
