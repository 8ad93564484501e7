"""Constants and non-asymptotic error bounds for unrolled derivatives.

With contraction modulus ``rho``, Lipschitz constants ``M_x`` / ``M_u`` of
``d_xT`` / ``d_uT`` in ``x`` and a bound ``kappa`` on ``||d_uT||``, the
forward-mode error obeys

    fwd_k <= rho^k fwd_0 + k rho^(k-1) gamma eps_0,
    gamma  = M_x kappa / (1 - rho) + M_u,

and a recursion started ``T'`` iterations late replaces ``rho^(k-1)`` in the
second term with ``rho^(k+T'-1)``.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .densela import as_vector, spectral_norm
from .errors import InvalidRange, NotAContraction
from .fixmap import RidgeLS


class ConstantsSource(str, Enum):
    ANALYTIC = "Analytic"
    TRAJECTORY_ESTIMATE = "TrajectoryEstimate"


@dataclass(frozen=True)
class BoundConstants:
    rho: float
    kappa: float
    M_x: float
    M_u: float
    gamma: float
    eps0: float
    fwd0: float
    source: ConstantsSource = ConstantsSource.ANALYTIC

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise NotAContraction(f"rho={self.rho} is not in [0, 1)")
        for name in ("kappa", "M_x", "M_u", "gamma", "eps0", "fwd0"):
            if getattr(self, name) < 0:
                raise InvalidRange(f"{name} must be non-negative")

    @classmethod
    def from_components(cls, rho, kappa, M_x, M_u, eps0, fwd0,
                        source=ConstantsSource.ANALYTIC, jacobian_norm=None):
        """Build the constants, composing ``gamma`` from its parts.

        If ``jacobian_norm`` (the exact ``||Dx*||``) is given it replaces the
        cruder ``kappa / (1 - rho)`` in ``gamma``.
        """
        if not 0.0 <= rho < 1.0:
            raise NotAContraction(f"rho={rho} is not in [0, 1)")
        jac = kappa / (1.0 - rho) if jacobian_norm is None else jacobian_norm
        gamma = M_x * jac + M_u
        return cls(float(rho), float(kappa), float(M_x), float(M_u), float(gamma),
                   float(eps0), float(fwd0), source)


def _curse_factor(k, rho, t_prime=0):
    """``k * rho^(k + t_prime - 1)`` with the ``k = 0`` term set to zero."""
    k = np.asarray(k, dtype=float)
    out = np.zeros_like(k)
    pos = k > 0
    out[pos] = k[pos] * rho ** (k[pos] + t_prime - 1)
    return out


def forward_bound_series(c, K):
    """Upper bound on the forward error for ``k = 0 .. K``."""
    if K < 0:
        raise InvalidRange("K must be non-negative")
    k = np.arange(K + 1)
    return c.rho ** k * c.fwd0 + _curse_factor(k, c.rho) * c.gamma * c.eps0


def late_start_bound_series(c, K, T_prime):
    """Upper bound on the error of a recursion started ``T_prime`` iterations late."""
    if K < 0 or T_prime < 0:
        raise InvalidRange("K and T_prime must be non-negative")
    k = np.arange(K + 1)
    return c.rho ** k * c.fwd0 + _curse_factor(k, c.rho, T_prime) * c.gamma * c.eps0


def _ridge_data_kappa(A, b, x, alpha, A_norm):
    # ||d_uT(x)|| over unit (dA, db): alpha * sqrt((||Ax-b|| + ||A|| ||x||)^2 + ||A||^2)
    r = np.linalg.norm(A @ x - b)
    return alpha * np.hypot(r + A_norm * np.linalg.norm(x), A_norm)


def constants_for_ridge(p, u, alpha=None, trajectory=None, direction=None, x0=None):
    """Bound constants for gradient descent on a :class:`~unrolling.fixmap.RidgeLS`.

    ``d_xT = I - alpha H`` does not depend on ``x`` so ``M_x = 0`` and
    ``rho = ||I - alpha H||`` exactly. ``d_uT`` is affine in ``x``: its
    Lipschitz constant is ``alpha`` (scalar ridge) or ``2 alpha ||A||`` (data
    parameter, per unit Frobenius direction), but it is unbounded globally, so
    ``kappa`` is measured over the supplied trajectory and ``x*``.

    ``eps0`` uses the trajectory start (else ``x0``, else zero). ``fwd0`` is
    the per-probe error ``||Dx* p||`` of a zero start when ``direction`` is
    given, otherwise the operator norm ``||Dx*||``.
    """
    if not isinstance(p, RidgeLS):
        raise TypeError("constants_for_ridge expects a RidgeLS instance")
    alpha = p.alpha if alpha is None else float(alpha)
    u = as_vector(u, "u")
    A, b, _ = p.unpack(u)
    n = p.dim_x
    J = np.eye(n) - alpha * p.hessian(u)
    rho = spectral_norm(J)
    if rho >= 1.0:
        raise NotAContraction(f"step size {alpha} gives ||d_xT|| = {rho} >= 1")

    x_star = p.solution(u)
    points = [x_star]
    if trajectory is not None:
        trajectory.require_tape()
        points.extend(trajectory.iterates)
        start = trajectory.x0
    elif x0 is not None:
        start = as_vector(x0, "x0")
        points.append(start)
    else:
        start = np.zeros(n)
        points.append(start)

    if p.scalar_ridge:
        M_u = alpha
        kappa = alpha * max(np.linalg.norm(x) for x in points)
        source = ConstantsSource.ANALYTIC
    else:
        A_norm = spectral_norm(A)
        M_u = 2.0 * alpha * A_norm
        kappa = max(_ridge_data_kappa(A, b, x, alpha, A_norm) for x in points)
        source = ConstantsSource.TRAJECTORY_ESTIMATE

    if direction is not None:
        fwd0 = np.linalg.norm(p.solution_jvp(u, direction))
    elif p.dim_u == 1:
        fwd0 = np.linalg.norm(p.solution_jvp(u, [1.0]))
    else:
        jac = np.vstack([p.solution_vjp(u, e) for e in np.eye(n)])
        fwd0 = spectral_norm(jac)
    eps0 = np.linalg.norm(start - x_star)
    return BoundConstants.from_components(rho, kappa, 0.0, M_u, eps0, fwd0, source)


def estimate_constants(problem, trajectory, x_star, eps0=None, fwd0=0.0, max_points=25):
    """Trajectory estimates of the constants for an arbitrary map.

    ``rho`` is the largest ``||d_xT(x^k)||`` over up to ``max_points`` evenly
    spaced tape entries (and ``x*``); ``M_x``, ``M_u`` are the largest
    observed difference quotients against ``x*`` and ``kappa`` the largest
    ``||d_uT(x^k)||``. Maps that are not contractions in this sense (e.g.
    heavy ball with momentum) raise :class:`NotAContraction`.
    """
    trajectory.require_tape()
    u = trajectory.u
    x_star = as_vector(x_star, "x_star")
    idx = np.unique(np.linspace(0, trajectory.k_final, min(max_points, trajectory.k_final + 1)).astype(int))
    Jx_star = problem.jacobian_x(x_star, u)
    Ju_star = problem.jacobian_u(x_star, u)
    rho = spectral_norm(Jx_star)
    kappa = spectral_norm(Ju_star)
    M_x = M_u = 0.0
    for k in idx:
        x = trajectory.iterates[k]
        Jx = problem.jacobian_x(x, u)
        Ju = problem.jacobian_u(x, u)
        rho = max(rho, spectral_norm(Jx))
        kappa = max(kappa, spectral_norm(Ju))
        dist = np.linalg.norm(x - x_star)
        if dist > 0:
            M_x = max(M_x, spectral_norm(Jx - Jx_star) / dist if np.any(Jx - Jx_star) else 0.0)
            M_u = max(M_u, spectral_norm(Ju - Ju_star) / dist if np.any(Ju - Ju_star) else 0.0)
    if rho >= 1.0:
        raise NotAContraction(f"measured ||d_xT|| = {rho} >= 1")
    if eps0 is None:
        eps0 = np.linalg.norm(trajectory.x0 - x_star)
    return BoundConstants.from_components(rho, kappa, M_x, M_u, eps0, fwd0,
                                          ConstantsSource.TRAJECTORY_ESTIMATE)


def gamma_residual_check(problem, traj, x_star, jac_probe, direction):
    """Measured ``||(d_xT^k - d_xT*) Dx* p + (d_uT^k - d_uT*) p||`` for each tape entry.

    ``jac_probe`` is ``Dx*(u) p`` for the parameter ``direction`` ``p``. The
    values can be compared against ``gamma * eps_k``.
    """
    traj.require_tape()
    u = traj.u
    d = as_vector(jac_probe, "jac_probe")
    p = as_vector(direction, "direction")
    ref = problem.jvp_x(x_star, u, d) + problem.jvp_u(x_star, u, p)
    return np.array([
        np.linalg.norm(problem.jvp_x(x, u, d) + problem.jvp_u(x, u, p) - ref)
        for x in traj.iterates
    ])
