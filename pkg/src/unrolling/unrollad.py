"""Forward- and reverse-mode differentiation through a recorded fixed-point run.

Both modes work on a single probe: forward mode propagates ``Dx^k p`` along a
parameter direction ``p``, reverse mode propagates ``w^T Dx^K`` from a seed
``w`` back through the tape. Truncation is supported in both: the forward
recursion may start late at tape index ``T'`` and the backward sweep may stop
at ``T'``. For equal ``T'`` the two outputs satisfy

    <w, forward output> == <reverse output, p>.
"""

from dataclasses import dataclass

import numpy as np

from .densela import as_vector
from .errors import DimensionMismatch, EmptySeries, IndexOutOfRange


@dataclass
class ForwardCarrier:
    """Forward-mode carriers ``values[k] = xdot^k_{T'}`` for ``k = 0 .. K - T'``."""

    values: np.ndarray
    direction: np.ndarray
    late_start: int

    @property
    def output(self):
        return self.values[-1]

    @property
    def n_steps(self):
        return self.values.shape[0] - 1


@dataclass
class ReverseSweep:
    """Backward-sweep carriers stored in ascending ``k``.

    Row ``j`` of ``xbar`` and ``ubar`` holds the carrier for tape index
    ``k = stop_index + j``; the last row is the initialization
    (``xbar^K = seed``, ``ubar^K = 0``) and the first row is the output.
    """

    xbar: np.ndarray
    ubar: np.ndarray
    seed: np.ndarray
    stop_index: int

    @property
    def output(self):
        return self.ubar[0]

    @property
    def k_final(self):
        return self.stop_index + self.ubar.shape[0] - 1

    def at(self, k):
        """``(xbar^k, ubar^k)`` for a tape index ``k``."""
        j = k - self.stop_index
        if not 0 <= j < self.ubar.shape[0]:
            raise IndexOutOfRange(f"k={k} outside [{self.stop_index}, {self.k_final}]")
        return self.xbar[j], self.ubar[j]


def _check_truncation(traj, t_prime):
    traj.require_tape()
    if not 0 <= t_prime <= traj.k_final:
        raise IndexOutOfRange(f"truncation index {t_prime} outside [0, {traj.k_final}]")


def forward_unroll(problem, traj, p_u, x0_dot=None, late_start=0):
    """Late-started forward-mode recursion.

    ``values[k+1] = d_xT(x^{k+T'}) values[k] + d_uT(x^{k+T'}) p_u`` for
    ``k = 0 .. K - T' - 1`` starting from ``values[0] = x0_dot`` (zero by
    default, whatever ``T'`` is).
    """
    _check_truncation(traj, late_start)
    u = traj.u
    p_u = as_vector(p_u, "p_u")
    if p_u.shape[0] != problem.dim_u:
        raise DimensionMismatch(f"direction has length {p_u.shape[0]}, expected {problem.dim_u}")
    if x0_dot is None:
        xdot = np.zeros(problem.dim_x)
    else:
        xdot = as_vector(x0_dot, "x0_dot")
        if xdot.shape[0] != problem.dim_x:
            raise DimensionMismatch("x0_dot does not match dim_x")

    n_steps = traj.k_final - late_start
    values = np.empty((n_steps + 1, problem.dim_x))
    values[0] = xdot
    for k in range(n_steps):
        x = traj.iterates[k + late_start]
        xdot = problem.jvp_x(x, u, xdot) + problem.jvp_u(x, u, p_u)
        values[k + 1] = xdot
    return ForwardCarrier(values, p_u, late_start)


def reverse_unroll(problem, traj, seed, stop_index=0):
    """Backward sweep ``xbar^k = xbar^{k+1} d_xT^k``, ``ubar^k = ubar^{k+1} + xbar^{k+1} d_uT^k``.

    Runs ``k = K-1 .. stop_index`` and keeps every intermediate carrier.
    """
    _check_truncation(traj, stop_index)
    u = traj.u
    w = as_vector(seed, "seed")
    if w.shape[0] != problem.dim_x:
        raise DimensionMismatch(f"seed has length {w.shape[0]}, expected {problem.dim_x}")

    K = traj.k_final
    n = K - stop_index + 1
    xbar = np.empty((n, problem.dim_x))
    ubar = np.empty((n, problem.dim_u))
    xb = w.copy()
    ub = np.zeros(problem.dim_u)
    xbar[-1], ubar[-1] = xb, ub
    for k in range(K - 1, stop_index - 1, -1):
        x = traj.iterates[k]
        ub = ub + problem.vjp_u(x, u, xb)
        xb = problem.vjp_x(x, u, xb)
        xbar[k - stop_index], ubar[k - stop_index] = xb, ub
    return ReverseSweep(xbar, ubar, w, stop_index)


def forward_error_series(carrier, oracle_jvp):
    """``||xdot^k - Dx* p||`` for each forward carrier."""
    oracle_jvp = as_vector(oracle_jvp, "oracle_jvp")
    if oracle_jvp.shape[0] != carrier.values.shape[1]:
        raise DimensionMismatch("oracle does not match the carrier dimension")
    return np.linalg.norm(carrier.values - oracle_jvp, axis=1)


def reverse_error_series(sweep, oracle_vjp):
    """``||ubar^k - w^T Dx*||`` in ascending ``k`` (entry ``j`` is ``k = stop_index + j``)."""
    oracle_vjp = as_vector(oracle_vjp, "oracle_vjp")
    if oracle_vjp.shape[0] != sweep.ubar.shape[1]:
        raise DimensionMismatch("oracle does not match the carrier dimension")
    return np.linalg.norm(sweep.ubar - oracle_vjp, axis=1)


def curse_indices(fwd_series, rev_series):
    """Position of the largest forward error and of the smallest reverse error.

    Ties go to the smallest position. For a truncated reverse sweep add its
    ``stop_index`` to get the tape index.
    """
    fwd = np.asarray(fwd_series, dtype=float)
    rev = np.asarray(rev_series, dtype=float)
    if fwd.size == 0 or rev.size == 0:
        raise EmptySeries("curse indices need non-empty series")
    return int(np.argmax(fwd)), int(np.argmin(rev))
