"""Budget-neutral truncation plans and choice of the truncation index.

A derivative step costs ``omega`` times an algorithm step. Dropping ``T`` of
the ``K`` derivative steps pays for ``omega * T`` extra algorithm steps, so
the algorithm runs ``K' = K + omega T`` steps in total, of which the first
``T' = T + omega T`` are not differentiated. ``omega * T`` is floored so the
plan never exceeds the budget.

The truncation index is picked by minimizing the late-start bound at the end
of the run,

    h(T) = rho^(K-T) fwd0 + (K-T) rho^(K+omega T-1) gamma eps0
         = A e^(delta T) + B (K-T) e^(-omega delta T),

with ``A = rho^K fwd0``, ``B = rho^(K-1) gamma eps0`` and ``delta = -ln rho``.
``h`` is convex on ``[0, K]``.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateObjective, InvalidRange

OMEGA_FORWARD = 2.5
OMEGA_REVERSE = 3.0
RHO_CLAMP = 1e-15


@dataclass(frozen=True)
class BudgetPlan:
    K: int
    T: int
    omega: float
    K_prime: int
    T_prime: int
    derivative_iters: int

    @property
    def budget(self):
        return self.K + self.omega * self.K

    @property
    def cost(self):
        return self.K_prime + self.omega * self.derivative_iters


def make_plan(K, T, omega):
    """Reallocate ``T`` derivative iterations to the algorithm at fixed cost."""
    if not 0 <= T <= K:
        raise InvalidRange(f"need 0 <= T <= K, got T={T}, K={K}")
    if not omega >= 1:
        raise InvalidRange(f"omega must be at least 1, got {omega}")
    extra = math.floor(omega * T)
    return BudgetPlan(int(K), int(T), float(omega), K + extra, T + extra, K - T)


@dataclass(frozen=True)
class TruncationObjective:
    A: float
    B: float
    delta: float
    omega: float
    K: int
    rho_clamped: bool = False

    def __post_init__(self):
        if self.A < 0 or self.B < 0:
            raise InvalidRange("A and B must be non-negative")
        if not self.delta > 0:
            raise InvalidRange("delta must be positive (rho in (0, 1))")
        if self.K < 0:
            raise InvalidRange("K must be non-negative")

    @classmethod
    def from_bound(cls, rho, K, fwd0, gamma, eps0, omega=OMEGA_REVERSE):
        """Objective for contraction ``rho`` and the bound constants.

        ``rho`` is clamped into ``[1e-15, 1 - 1e-15]``; ``rho_clamped`` records
        whether that happened.
        """
        r = min(max(rho, RHO_CLAMP), 1.0 - RHO_CLAMP)
        return cls(A=r ** K * fwd0, B=r ** (K - 1) * gamma * eps0, delta=-math.log(r),
                   omega=float(omega), K=int(K), rho_clamped=r != rho)

    @property
    def rho(self):
        return math.exp(-self.delta)


def _scaled_exp(coef, exponent):
    """``coef * exp(exponent)`` without ``0 * inf`` when ``exponent`` is huge."""
    coef = np.asarray(coef, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        out = np.exp(np.log(np.abs(coef)) + exponent) * np.sign(coef)
    return np.where(coef == 0, 0.0, out)


def _check_T(obj, T):
    T_arr = np.asarray(T, dtype=float)
    if not np.all((T_arr >= 0) & (T_arr <= obj.K)):
        raise InvalidRange(f"T={T} outside [0, {obj.K}]")
    return T_arr


def objective_h(obj, T):
    """``A e^(delta T) + B (K - T) e^(-omega delta T)``."""
    _check_T(obj, T)
    d, w = obj.delta, obj.omega
    return float(_scaled_exp(obj.A, d * T) + _scaled_exp(obj.B * (obj.K - T), -w * d * T))


def truncation_bound(rho, K, T, fwd0, gamma, eps0, omega):
    """The same objective written directly in ``rho``."""
    return rho ** (K - T) * fwd0 + (K - T) * rho ** (K + omega * T - 1) * gamma * eps0


def objective_h_derivatives(obj, T):
    """Closed-form ``(h'(T), h''(T))``; ``T`` may be an array."""
    T_arr = _check_T(obj, T)
    A, B, d, w, K = obj.A, obj.B, obj.delta, obj.omega, obj.K
    T = T_arr
    h1 = _scaled_exp(A * d, d * T) + _scaled_exp(B * (-1.0 - w * d * (K - T)), -w * d * T)
    h2 = _scaled_exp(A * d * d, d * T) + _scaled_exp(B * w * d * (2.0 + w * d * (K - T)), -w * d * T)
    if T_arr.ndim:
        return h1, h2
    return float(h1), float(h2)


def optimal_T_discrete(obj):
    """Exhaustive minimum over ``T = 0 .. K``; ties go to the smaller ``T``."""
    Ts = np.arange(obj.K + 1, dtype=float)
    d, w = obj.delta, obj.omega
    h = _scaled_exp(obj.A, d * Ts) + _scaled_exp(obj.B * (obj.K - Ts), -w * d * Ts)
    t = int(np.argmin(h))
    return t, float(h[t])


def optimal_T_relaxed(obj, tol=1e-9):
    """Minimizer of ``h`` over ``[0, K]`` by bisection on ``h'``.

    ``h'`` is non-decreasing, so the answer is ``0`` when ``h'(0) >= 0``,
    ``K`` when ``h'(K) <= 0`` and the bracketed root otherwise. A zero
    objective warns with :class:`DegenerateObjective` and returns ``0``.
    """
    if not tol > 0:
        raise InvalidRange("tol must be positive")
    if obj.A == 0 and obj.B == 0:
        warnings.warn("A = B = 0: every truncation index is optimal", DegenerateObjective)
        return 0.0
    lo, hi = 0.0, float(obj.K)
    if objective_h_derivatives(obj, lo)[0] >= 0:
        return lo
    if objective_h_derivatives(obj, hi)[0] <= 0:
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if objective_h_derivatives(obj, mid)[0] > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
