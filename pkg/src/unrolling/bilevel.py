"""Gradient-based bilevel optimization with unrolled hypergradients.

Each outer round solves the inner fixed-point problem to a successive-step
tolerance, back-propagates the outer loss gradient through the recorded
iterations and takes a gradient step on ``u``. With warm starting, the next
inner solve starts from the last inner iterate, which skips the early
iterations where unrolled derivatives are least accurate.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .densela import as_matrix, as_vector
from .errors import InvalidRange, MismatchedConfig
from .solver import StopReason, StopRule, run_fpi
from .unrollad import reverse_unroll


class QuadraticLoss:
    """``l(x) = ||C x - y||^2 / 2``; with ``C = I`` and ``y = 0`` it is ``||x||^2 / 2``."""

    def __init__(self, C, y):
        self.C = as_matrix(C, "C")
        self.y = as_vector(y, "y")

    @classmethod
    def half_norm(cls, dim):
        return cls(np.eye(dim), np.zeros(dim))

    def value(self, x):
        r = self.C @ x - self.y
        return 0.5 * float(r @ r)

    def grad(self, x):
        return self.C.T @ (self.C @ x - self.y)


StepSizes = Union[float, Sequence[float], Callable[[int], float]]


@dataclass
class BilevelConfig:
    R: int
    eps: float
    step_sizes: StepSizes
    x0: np.ndarray
    u0: np.ndarray
    warm_start: bool = True
    inner_cap: int = 10_000

    def __post_init__(self):
        if self.R < 1:
            raise InvalidRange("R must be at least 1")
        if not self.eps > 0:
            raise InvalidRange("eps must be positive")
        if self.inner_cap < 1:
            raise InvalidRange("inner_cap must be at least 1")
        self.x0 = as_vector(self.x0, "x0")
        self.u0 = as_vector(self.u0, "u0")
        for r in range(self.R):
            if self.step_size(r) < 0:
                raise InvalidRange("step sizes must be non-negative")

    def step_size(self, r):
        if callable(self.step_sizes):
            return float(self.step_sizes(r))
        if np.ndim(self.step_sizes) == 0:
            return float(self.step_sizes)
        return float(self.step_sizes[r])

    def same_except_warm_start(self, other):
        if (self.R, self.eps, self.inner_cap) != (other.R, other.eps, other.inner_cap):
            return False
        if not (np.array_equal(self.x0, other.x0) and np.array_equal(self.u0, other.u0)):
            return False
        return all(self.step_size(r) == other.step_size(r) for r in range(self.R))


@dataclass
class BilevelRound:
    u: np.ndarray
    K: int
    loss: float
    hypergradient: np.ndarray
    init_error: float
    cap_reached: bool


@dataclass
class BilevelTrace:
    rounds: list = field(default_factory=list)
    u_final: Optional[np.ndarray] = None
    config: Optional[BilevelConfig] = None

    def __len__(self):
        return len(self.rounds)

    @property
    def inner_iterations(self):
        return np.array([r.K for r in self.rounds])

    @property
    def init_errors(self):
        return np.array([r.init_error for r in self.rounds])


def hypergradient(problem, outer_loss, traj):
    """Reverse-mode ``grad (l o x^K)(u)`` over the whole recorded run."""
    seed = outer_loss.grad(traj.final)
    return reverse_unroll(problem, traj, seed, 0).output


def run_bilevel(problem, outer_loss, cfg):
    """Run ``cfg.R`` outer rounds and record each of them.

    The inner solve always performs at least one update and stops once
    ``||x^k - x^{k-1}|| <= eps`` or after ``inner_cap`` updates (flagged in
    the round record, not raised).
    """
    rule = StopRule(max_iters=cfg.inner_cap, successive_tol=cfg.eps)
    u = cfg.u0.copy()
    x0 = cfg.x0.copy()
    trace = BilevelTrace(config=cfg)
    for r in range(cfg.R):
        traj = run_fpi(problem, u, x0, rule, record_tape=True)
        x_K = traj.final
        d = hypergradient(problem, outer_loss, traj)
        trace.rounds.append(BilevelRound(
            u=u.copy(),
            K=traj.k_final,
            loss=outer_loss.value(x_K),
            hypergradient=d,
            init_error=float(np.linalg.norm(traj.x0 - x_K)),
            cap_reached=traj.stop_reason is StopReason.ITERATION_CAP,
        ))
        u = u - cfg.step_size(r) * d
        x0 = x_K.copy() if cfg.warm_start else cfg.x0.copy()
    trace.u_final = u
    return trace


@dataclass
class WarmStartReport:
    K_warm: np.ndarray
    K_cold: np.ndarray
    init_error_warm: np.ndarray
    init_error_cold: np.ndarray
    K_ratio: np.ndarray
    init_error_ratio: np.ndarray
    total_warm: int
    total_cold: int
    median_K_ratio: Optional[float]

    def summary(self):
        lines = [f"inner iterations: warm {self.total_warm}, cold {self.total_cold}"]
        if self.median_K_ratio is None:
            lines.append("single round: no warm-started round to compare")
        else:
            lines.append(f"median K_r(warm)/K_r(cold) over r >= 1: {self.median_K_ratio:.4g}")
        return "\n".join(lines)


def warm_start_truncation_report(trace_warm, trace_cold):
    """Compare inner work and starting distance of paired warm / cold runs."""
    if len(trace_warm) != len(trace_cold):
        raise MismatchedConfig("traces have different numbers of rounds")
    cw, cc = trace_warm.config, trace_cold.config
    if cw is not None and cc is not None and not cw.same_except_warm_start(cc):
        raise MismatchedConfig("configs differ in more than warm_start")
    Kw, Kc = trace_warm.inner_iterations, trace_cold.inner_iterations
    ew, ec = trace_warm.init_errors, trace_cold.init_errors
    with np.errstate(divide="ignore", invalid="ignore"):
        K_ratio = Kw / Kc
        e_ratio = np.where(ec > 0, ew / np.where(ec > 0, ec, 1.0), np.nan)
    median = float(np.median(K_ratio[1:])) if len(Kw) > 1 else None
    return WarmStartReport(Kw, Kc, ew, ec, K_ratio, e_ratio,
                           int(Kw.sum()), int(Kc.sum()), median)
