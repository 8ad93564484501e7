"""Small dense linear algebra kernel.

Vectors and matrices are plain float64 numpy arrays. The helpers here
validate shapes and finiteness and provide the few numerical routines the
rest of the package relies on: matrix-vector products, a pivoted Gaussian
elimination solver and power-iteration estimates of extreme eigenvalues.

Everything is sized for desk-scale problems (a few dozen unknowns).
"""

import numpy as np

from .errors import DimensionMismatch, NoConvergence, NotSymmetric, SingularMatrix

EIG_TOL = 1e-10
EIG_MAX_ITER = 10_000
_STAGNATION_WINDOW = 50


def as_vector(v, name="vector"):
    """Return ``v`` as a finite 1-D float64 array."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1 or arr.size == 0:
        raise DimensionMismatch(f"{name} must be a non-empty 1-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def as_matrix(M, name="matrix"):
    """Return ``M`` as a finite 2-D float64 array."""
    arr = np.asarray(M, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise DimensionMismatch(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def matvec(M, v):
    """Matrix-vector product ``M @ v`` with a shape check."""
    M = as_matrix(M)
    v = as_vector(v)
    if M.shape[1] != v.shape[0]:
        raise DimensionMismatch(f"cannot multiply {M.shape} matrix by length-{v.shape[0]} vector")
    return M @ v


def solve_linear(M, b):
    """Solve ``M x = b`` by Gaussian elimination with partial pivoting.

    Raises
    ------
    SingularMatrix
        If a pivot falls below ``1e-12`` times the largest row norm of ``M``.
    """
    M = as_matrix(M)
    b = as_vector(b)
    n = M.shape[0]
    if M.shape[1] != n:
        raise DimensionMismatch(f"matrix must be square, got {M.shape}")
    if b.shape[0] != n:
        raise DimensionMismatch(f"rhs has length {b.shape[0]}, expected {n}")

    threshold = 1e-12 * np.max(np.linalg.norm(M, axis=1))
    aug = np.hstack([M, b[:, None]])
    for col in range(n):
        piv = col + int(np.argmax(np.abs(aug[col:, col])))
        if abs(aug[piv, col]) <= threshold:
            raise SingularMatrix(f"pivot {aug[piv, col]:.3e} in column {col} below {threshold:.3e}")
        if piv != col:
            aug[[col, piv]] = aug[[piv, col]]
        factors = aug[col + 1:, col] / aug[col, col]
        aug[col + 1:, col:] -= np.outer(factors, aug[col, col:])

    x = np.empty(n)
    for i in range(n - 1, -1, -1):
        x[i] = (aug[i, n] - aug[i, i + 1:n] @ x[i + 1:]) / aug[i, i]
    return x


def _start_vector(n, perturbed=False):
    v = np.ones(n)
    if perturbed:
        # fixed, deterministic perturbation that breaks the symmetry of all-ones
        v = v + 0.5 * np.sin(np.arange(1, n + 1) * 1.618033988749895)
    return v / np.linalg.norm(v)


def _power_iteration(apply, n, tol, max_iter, scale_floor):
    """Dominant eigenpair of a symmetric operator by power iteration.

    Returns the Rayleigh quotient and unit vector. The all-ones start is
    replaced by a fixed perturbed start when the iteration collapses to zero
    or the quotient stagnates without meeting the tolerance.
    """
    theta, v = 0.0, _start_vector(n)
    for perturbed in (False, True):
        v = _start_vector(n, perturbed)
        theta = v @ apply(v)
        stagnant = 0
        for _ in range(max_iter):
            w = apply(v)
            nrm = np.linalg.norm(w)
            if nrm == 0.0:
                break
            v = w / nrm
            new = v @ apply(v)
            change = abs(new - theta)
            theta = new
            if change <= tol * max(abs(theta), scale_floor):
                return theta, v
            stagnant = stagnant + 1 if change <= 1e-16 * abs(theta) else 0
            if stagnant >= _STAGNATION_WINDOW:
                break
        else:
            # cap reached; the caller polishes the estimate
            return theta, v
    return theta, v


def _is_positive_definite(S):
    try:
        np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        return False
    return True


def _polish_min(S, theta, v, tol, max_iter, scale):
    """Refine the smallest eigenvalue of symmetric ``S`` by shift-and-invert.

    ``theta`` is a Rayleigh quotient of ``S`` (hence an upper bound on the
    minimum). Shifts are only accepted once ``S - sigma I`` is verified
    positive definite, so the iteration can only converge to the minimum.
    """
    n = S.shape[0]
    eye = np.eye(n)
    floor = 1e-13 * scale

    def safe_shift(theta, v):
        step = max(np.linalg.norm(S @ v - theta * v), floor)
        for _ in range(200):
            sigma = theta - step
            if _is_positive_definite(S - sigma * eye):
                return sigma
            step *= 2.0
        raise NoConvergence("could not bracket the extreme eigenvalue")

    sigma = safe_shift(theta, v)
    for _ in range(max_iter):
        try:
            w = solve_linear(S - sigma * eye, v)
        except SingularMatrix:
            # shift agrees with the eigenvalue to working precision
            return sigma
        v = w / np.linalg.norm(w)
        new = v @ S @ v
        if abs(new - theta) <= tol * max(abs(new), floor):
            return new
        theta = new
        candidate = safe_shift(theta, v)
        if candidate > sigma:
            sigma = candidate
    raise NoConvergence(f"inverse iteration did not converge in {max_iter} steps")


def spectral_extremes_sym(M, tol=EIG_TOL, max_iter=EIG_MAX_ITER):
    """Smallest and largest eigenvalue of a symmetric matrix.

    Power iteration on ``M`` gives the dominant-magnitude eigenvalue; power
    iteration on the shifted matrix ``dom I - M`` gives the opposite end.
    Both estimates are then polished by shift-and-invert power iteration,
    which keeps clustered spectra (small gaps next to an extreme) accurate.

    Returns
    -------
    (lambda_min, lambda_max)
    """
    M = as_matrix(M)
    n = M.shape[0]
    if M.shape[1] != n:
        raise DimensionMismatch(f"matrix must be square, got {M.shape}")
    mag = np.max(np.abs(M))
    if np.max(np.abs(M - M.T)) > 1e-10 * mag:
        raise NotSymmetric("matrix is not symmetric within 1e-10 relative")
    if mag == 0.0:
        return 0.0, 0.0
    M = 0.5 * (M + M.T)
    if n == 1:
        return float(M[0, 0]), float(M[0, 0])

    scale = np.linalg.norm(M, ord=np.inf)
    dom, v_dom = _power_iteration(lambda x: M @ x, n, tol, max_iter, 1e-13 * scale)
    sign = 1.0 if dom >= 0 else -1.0
    shifted, v_other = _power_iteration(
        lambda x: sign * (dom * x - M @ x), n, tol, max_iter, 1e-13 * scale)
    other = dom - sign * shifted

    # the wanted extreme of M is the minimum of +M (low end) or -M (high end)
    dom = -sign * _polish_min(-sign * M, -sign * dom, v_dom, tol, max_iter, scale)
    other = sign * _polish_min(sign * M, sign * other, v_other, tol, max_iter, scale)
    lo, hi = (other, dom) if sign > 0 else (dom, other)
    return float(lo), float(hi)


def spectral_norm(M):
    """Largest singular value of ``M`` (any shape)."""
    M = as_matrix(M)
    if not np.any(M):
        return 0.0
    G = M.T @ M if M.shape[1] <= M.shape[0] else M @ M.T
    _, lam_max = spectral_extremes_sym(G)
    return float(np.sqrt(max(lam_max, 0.0)))
