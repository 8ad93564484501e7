"""Parameterized fixed-point maps ``T(x, u)`` and their partial Jacobians.

A map exposes its value and the four matrix-free products with the partial
Jacobians ``d_x T`` and ``d_u T``:

    jvp_x(x, u, v) = d_x T(x, u) v        vjp_x(x, u, w) = w^T d_x T(x, u)
    jvp_u(x, u, p) = d_u T(x, u) p        vjp_u(x, u, w) = w^T d_u T(x, u)

The parameter ``u`` is always a flat vector. Maps that know their fixed
point in closed form also implement ``solution`` and ``solution_jvp`` /
``solution_vjp`` which serve as implicit-differentiation oracles.
"""

from dataclasses import dataclass

import numpy as np

from .densela import as_matrix, as_vector, solve_linear
from .errors import DimensionMismatch, InvalidRange


class FixedPointProblem:
    """Base class for a smooth map ``T: X x U -> X``."""

    dim_x: int
    dim_u: int

    def eval(self, x, u):
        raise NotImplementedError

    def jvp_x(self, x, u, v):
        raise NotImplementedError

    def vjp_x(self, x, u, w):
        raise NotImplementedError

    def jvp_u(self, x, u, p):
        raise NotImplementedError

    def vjp_u(self, x, u, w):
        raise NotImplementedError

    # Optional oracles -------------------------------------------------

    def solution(self, u):
        raise NotImplementedError(f"{type(self).__name__} has no closed-form fixed point")

    def solution_jvp(self, u, p):
        """``Dx*(u) p`` via the implicit function theorem."""
        x = self.solution(u)
        rhs = self.jvp_u(x, u, p)
        return solve_linear(np.eye(self.dim_x) - self.jacobian_x(x, u), rhs)

    def solution_vjp(self, u, w):
        """``w^T Dx*(u)`` via the implicit function theorem."""
        x = self.solution(u)
        lam = solve_linear((np.eye(self.dim_x) - self.jacobian_x(x, u)).T, as_vector(w))
        return self.vjp_u(x, u, lam)

    # Dense helpers, built by stacking basis products --------------------

    def jacobian_x(self, x, u):
        eye = np.eye(self.dim_x)
        return np.column_stack([self.jvp_x(x, u, e) for e in eye])

    def jacobian_u(self, x, u):
        eye = np.eye(self.dim_u)
        return np.column_stack([self.jvp_u(x, u, e) for e in eye])

    def check_x(self, x):
        x = as_vector(x, "x")
        if x.shape[0] != self.dim_x:
            raise DimensionMismatch(f"x has length {x.shape[0]}, expected {self.dim_x}")
        return x

    def check_u(self, u):
        u = as_vector(u, "u")
        if u.shape[0] != self.dim_u:
            raise DimensionMismatch(f"u has length {u.shape[0]}, expected {self.dim_u}")
        return u


class AffineMap(FixedPointProblem):
    """``T(x, u) = Q x + B u + c``.

    The simplest contraction with a closed-form fixed point; mostly useful
    for tests and hand-checkable examples such as ``T(x, u) = 0.5 x + u``.
    """

    def __init__(self, Q, B, c=None):
        self.Q = as_matrix(Q, "Q")
        self.B = as_matrix(B, "B")
        self.dim_x, self.dim_u = self.B.shape
        if self.Q.shape != (self.dim_x, self.dim_x):
            raise DimensionMismatch("Q must be square and match the rows of B")
        self.c = np.zeros(self.dim_x) if c is None else as_vector(c, "c")

    def eval(self, x, u):
        return self.Q @ self.check_x(x) + self.B @ self.check_u(u) + self.c

    def jvp_x(self, x, u, v):
        return self.Q @ as_vector(v)

    def vjp_x(self, x, u, w):
        return as_vector(w) @ self.Q

    def jvp_u(self, x, u, p):
        return self.B @ as_vector(p)

    def vjp_u(self, x, u, w):
        return as_vector(w) @ self.B

    def jacobian_x(self, x, u):
        return self.Q.copy()

    def solution(self, u):
        return solve_linear(np.eye(self.dim_x) - self.Q, self.B @ self.check_u(u) + self.c)


class SmoothObjective:
    """Interface for ``f(x, u)`` used by gradient-descent maps.

    Subclasses provide the gradient in ``x`` and three second-order products:
    ``hess_vec`` (d_x grad_x f . v), ``cross_vec`` (d_u grad_x f . p) and
    ``cross_vec_T`` (w^T d_u grad_x f).
    """

    dim_x: int
    dim_u: int

    def value(self, x, u):
        raise NotImplementedError

    def grad(self, x, u):
        raise NotImplementedError

    def hess_vec(self, x, u, v):
        raise NotImplementedError

    def cross_vec(self, x, u, p):
        raise NotImplementedError

    def cross_vec_T(self, x, u, w):
        raise NotImplementedError


class ShiftedQuadratic(SmoothObjective):
    """``f(x, u) = ||x - u||^2 / 2`` with ``x`` and ``u`` of equal size; ``x*(u) = u``."""

    def __init__(self, dim):
        self.dim_x = self.dim_u = int(dim)

    def value(self, x, u):
        return 0.5 * float(np.sum((np.asarray(x) - np.asarray(u)) ** 2))

    def grad(self, x, u):
        return as_vector(x) - as_vector(u)

    def hess_vec(self, x, u, v):
        return as_vector(v)

    def cross_vec(self, x, u, p):
        return -as_vector(p)

    def cross_vec_T(self, x, u, w):
        return -as_vector(w)

    def solution(self, u):
        return as_vector(u).copy()


@dataclass(frozen=True, eq=False)
class RidgeLS(SmoothObjective):
    """Least squares, optionally ridge-regularized, solved by gradient descent.

    Two parameterizations are supported:

    * ``scalar_ridge=True``: ``f(x, u) = ||Ax - b||^2/2 + u ||x||^2/2`` with
      ``u = [u]`` a single regularization weight.
    * ``scalar_ridge=False``: ``f(x, u) = ||Ax - b||^2/2`` with the data as the
      parameter, packed row-major as ``u = vec(A) ++ b``. The stored ``A`` and
      ``b`` are then only the default point, see :meth:`default_u`.

    ``alpha`` is the gradient step used when the objective is turned into a
    map (see :func:`gd_map`).
    """

    A: np.ndarray
    b: np.ndarray
    alpha: float
    scalar_ridge: bool = True

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        b = as_vector(self.b, "b")
        if b.shape[0] != A.shape[0]:
            raise DimensionMismatch(f"b has length {b.shape[0]}, A has {A.shape[0]} rows")
        if not self.alpha > 0:
            raise InvalidRange("alpha must be positive")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def m_rows(self):
        return self.A.shape[0]

    @property
    def dim_x(self):
        return self.A.shape[1]

    @property
    def dim_u(self):
        if self.scalar_ridge:
            return 1
        return self.A.size + self.m_rows

    def default_u(self, reg=0.0):
        """Parameter vector at the stored data (or ``[reg]`` in scalar mode)."""
        if self.scalar_ridge:
            return np.array([float(reg)])
        return np.concatenate([self.A.ravel(), self.b])

    def unpack(self, u):
        """Return ``(A, b, reg)`` for parameter ``u``."""
        u = as_vector(u, "u")
        if u.shape[0] != self.dim_u:
            raise DimensionMismatch(f"u has length {u.shape[0]}, expected {self.dim_u}")
        if self.scalar_ridge:
            if u[0] < 0:
                raise InvalidRange("ridge weight must be non-negative")
            return self.A, self.b, u[0]
        n_a = self.A.size
        return u[:n_a].reshape(self.A.shape), u[n_a:], 0.0

    def _split_direction(self, p):
        p = as_vector(p, "direction")
        if p.shape[0] != self.dim_u:
            raise DimensionMismatch(f"direction has length {p.shape[0]}, expected {self.dim_u}")
        n_a = self.A.size
        return p[:n_a].reshape(self.A.shape), p[n_a:]

    def value(self, x, u):
        A, b, reg = self.unpack(u)
        r = A @ x - b
        return 0.5 * float(r @ r) + 0.5 * reg * float(x @ x)

    def grad(self, x, u):
        A, b, reg = self.unpack(u)
        return A.T @ (A @ x - b) + reg * x

    def hess_vec(self, x, u, v):
        A, _, reg = self.unpack(u)
        return A.T @ (A @ v) + reg * v

    def cross_vec(self, x, u, p):
        A, b, _ = self.unpack(u)
        if self.scalar_ridge:
            return x * as_vector(p)[0]
        dA, db = self._split_direction(p)
        # derivative of A^T(Ax - b) along (dA, db)
        return dA.T @ (A @ x - b) + A.T @ (dA @ x) - A.T @ db

    def cross_vec_T(self, x, u, w):
        A, b, _ = self.unpack(u)
        w = as_vector(w)
        if self.scalar_ridge:
            return np.array([x @ w])
        Aw = A @ w
        gA = np.outer(A @ x - b, w) + np.outer(Aw, x)
        return np.concatenate([gA.ravel(), -Aw])

    def hessian(self, u):
        A, _, reg = self.unpack(u)
        return A.T @ A + reg * np.eye(self.dim_x)

    def solution(self, u):
        """Closed-form minimizer from the normal equations."""
        A, b, _ = self.unpack(u)
        return solve_linear(self.hessian(u), A.T @ b)

    def solution_jvp(self, u, p):
        """``Dx*(u) p = -(A^T A + u I)^-1 (d_u grad f) p`` at ``x*(u)``.

        Equal to ``(I - d_x T)^-1 d_u T p`` for any step size, since ``alpha``
        cancels.
        """
        x = self.solution(u)
        return -solve_linear(self.hessian(u), self.cross_vec(x, u, p))

    def solution_vjp(self, u, w):
        x = self.solution(u)
        lam = solve_linear(self.hessian(u), as_vector(w))
        return -self.cross_vec_T(x, u, lam)


def ridge_solution_oracle(p: RidgeLS, u):
    """``x*(u)`` for a ridge / least-squares problem."""
    return p.solution(u)


def ridge_solution_jacobian_oracle(p: RidgeLS, u, direction):
    """``Dx*(u) . direction`` by a single linear solve."""
    return p.solution_jvp(u, direction)


class GradientDescentMap(FixedPointProblem):
    """``T(x, u) = x - alpha grad_x f(x, u)``."""

    def __init__(self, objective, alpha):
        if not alpha > 0:
            raise InvalidRange("alpha must be positive")
        self.objective = objective
        self.alpha = float(alpha)
        self.dim_x = objective.dim_x
        self.dim_u = objective.dim_u

    def eval(self, x, u):
        x = self.check_x(x)
        return x - self.alpha * self.objective.grad(x, self.check_u(u))

    def jvp_x(self, x, u, v):
        v = as_vector(v)
        return v - self.alpha * self.objective.hess_vec(x, u, v)

    def vjp_x(self, x, u, w):
        # the Hessian is symmetric
        return self.jvp_x(x, u, w)

    def jvp_u(self, x, u, p):
        return -self.alpha * self.objective.cross_vec(x, u, p)

    def vjp_u(self, x, u, w):
        return -self.alpha * self.objective.cross_vec_T(x, u, w)

    def solution(self, u):
        if not hasattr(self.objective, "solution"):
            return super().solution(u)
        return self.objective.solution(u)

    def solution_jvp(self, u, p):
        if hasattr(self.objective, "solution_jvp"):
            return self.objective.solution_jvp(u, p)
        return super().solution_jvp(u, p)

    def solution_vjp(self, u, w):
        if hasattr(self.objective, "solution_vjp"):
            return self.objective.solution_vjp(u, w)
        return super().solution_vjp(u, w)


def gd_map(objective, alpha=None):
    """Gradient-descent update map of ``objective``.

    ``alpha`` defaults to ``objective.alpha`` when the objective carries one
    (as :class:`RidgeLS` does).
    """
    if alpha is None:
        alpha = getattr(objective, "alpha", None)
        if alpha is None:
            raise InvalidRange("no step size given")
    return GradientDescentMap(objective, alpha)


class HeavyBallMap(FixedPointProblem):
    """Heavy-ball update on the stacked state ``z = (x1, x2)``.

    ``T(z, u) = (x1 - alpha grad f(x1, u) + beta (x1 - x2), x1)``. This map
    is generally *not* a contraction in the Euclidean norm even when its
    spectral radius is below one, so bounds that need a contraction refuse it.
    """

    def __init__(self, objective, alpha, beta):
        if not 0.0 <= beta < 1.0:
            raise InvalidRange("beta must lie in [0, 1)")
        self.inner = GradientDescentMap(objective, alpha)
        self.alpha = self.inner.alpha
        self.beta = float(beta)
        self.n = self.inner.dim_x
        self.dim_x = 2 * self.n
        self.dim_u = self.inner.dim_u

    def _split(self, z):
        z = as_vector(z)
        if z.shape[0] != self.dim_x:
            raise DimensionMismatch(f"state has length {z.shape[0]}, expected {self.dim_x}")
        return z[:self.n], z[self.n:]

    def eval(self, z, u):
        x1, x2 = self._split(z)
        return np.concatenate([self.inner.eval(x1, u) + self.beta * (x1 - x2), x1])

    def jvp_x(self, z, u, v):
        x1, _ = self._split(z)
        v1, v2 = self._split(v)
        return np.concatenate([self.inner.jvp_x(x1, u, v1) + self.beta * (v1 - v2), v1])

    def vjp_x(self, z, u, w):
        x1, _ = self._split(z)
        w1, w2 = self._split(w)
        return np.concatenate([self.inner.vjp_x(x1, u, w1) + self.beta * w1 + w2, -self.beta * w1])

    def jvp_u(self, z, u, p):
        x1, _ = self._split(z)
        return np.concatenate([self.inner.jvp_u(x1, u, p), np.zeros(self.n)])

    def vjp_u(self, z, u, w):
        x1, _ = self._split(z)
        w1, _ = self._split(w)
        return self.inner.vjp_u(x1, u, w1)

    def solution(self, u):
        x = self.inner.solution(u)
        return np.concatenate([x, x])

    def solution_jvp(self, u, p):
        d = self.inner.solution_jvp(u, p)
        return np.concatenate([d, d])


def heavy_ball_map(objective, alpha, beta):
    return HeavyBallMap(objective, alpha, beta)
