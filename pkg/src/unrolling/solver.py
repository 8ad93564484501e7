"""Fixed-point iteration with an optional trajectory tape."""

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .densela import as_vector
from .errors import DimensionMismatch, InvalidRange, NonFiniteIterate, NoTape


class StopReason(str, Enum):
    ITERATION_CAP = "IterationCap"
    SUCCESSIVE_TOLERANCE = "SuccessiveTolerance"


@dataclass(frozen=True)
class StopRule:
    """Stop after ``max_iters`` updates or once ``||x^k - x^{k-1}|| <= successive_tol``."""

    max_iters: Optional[int] = None
    successive_tol: Optional[float] = None

    def __post_init__(self):
        if self.max_iters is None and self.successive_tol is None:
            raise InvalidRange("a stop rule needs max_iters, successive_tol or both")
        if self.max_iters is not None and self.max_iters < 0:
            raise InvalidRange("max_iters must be non-negative")
        if self.successive_tol is not None and not self.successive_tol > 0:
            raise InvalidRange("successive_tol must be positive")


@dataclass
class Trajectory:
    """Iterates ``x^0 ... x^K`` of a fixed-point run.

    Without a tape only ``x^0`` and ``x^K`` are kept and ``iterates`` has two
    rows (one when ``K == 0``).
    """

    iterates: np.ndarray
    u: np.ndarray
    k_final: int
    stop_reason: StopReason
    has_tape: bool = True

    @property
    def x0(self):
        return self.iterates[0]

    @property
    def final(self):
        return self.iterates[-1]

    def require_tape(self):
        if not self.has_tape:
            raise NoTape("trajectory was recorded with record_tape=False")

    def __getitem__(self, k):
        self.require_tape()
        return self.iterates[k]


def run_fpi(problem, u, x0, rule, record_tape=True):
    """Iterate ``x^{k+1} = T(x^k, u)`` until ``rule`` fires.

    The iteration cap is checked before each update and the successive
    tolerance after it, so ``max_iters=0`` returns ``x0`` untouched.

    Raises
    ------
    NonFiniteIterate
        As soon as an iterate contains NaN or Inf.
    """
    u = as_vector(u, "u")
    x = as_vector(x0, "x0").copy()
    if x.shape[0] != problem.dim_x:
        raise DimensionMismatch(f"x0 has length {x.shape[0]}, expected {problem.dim_x}")

    tape = [x]
    k = 0
    reason = StopReason.ITERATION_CAP
    tol = rule.successive_tol
    while rule.max_iters is None or k < rule.max_iters:
        # overflow is reported below as NonFiniteIterate
        with np.errstate(over="ignore", invalid="ignore"):
            x_new = np.asarray(problem.eval(x, u), dtype=np.float64)
        k += 1
        if not np.all(np.isfinite(x_new)):
            raise NonFiniteIterate(f"iterate {k} is not finite")
        if record_tape:
            tape.append(x_new)
        step = np.linalg.norm(x_new - x) if tol is not None else None
        x = x_new
        if tol is not None and step <= tol:
            reason = StopReason.SUCCESSIVE_TOLERANCE
            break

    if not record_tape and k > 0:
        tape.append(x)
    return Trajectory(np.array(tape), u, k, reason, has_tape=record_tape)


def iterate_errors(traj, x_star):
    """``||x^k - x*||`` for ``k = 0 .. K``."""
    traj.require_tape()
    x_star = as_vector(x_star, "x_star")
    if x_star.shape[0] != traj.iterates.shape[1]:
        raise DimensionMismatch("x_star does not match the iterate dimension")
    return np.linalg.norm(traj.iterates - x_star, axis=1)
