import numpy as np
import pytest

from conftest import ridge_instance
from oracles import central_diff, rel_err
from unrolling.densela import spectral_extremes_sym, spectral_norm
from unrolling.errors import DimensionMismatch, InvalidRange
from unrolling.fixmap import (
    AffineMap,
    RidgeLS,
    ShiftedQuadratic,
    gd_map,
    heavy_ball_map,
    ridge_solution_jacobian_oracle,
    ridge_solution_oracle,
)


def _maps():
    scalar = ridge_instance(10, seed=1)
    data = ridge_instance(6, seed=2, M=12, scalar_ridge=False)
    hb = ridge_instance(5, seed=4)
    return [
        ("gd-scalar", gd_map(scalar), np.array([0.7])),
        ("gd-data", gd_map(data), data.default_u()),
        ("heavy-ball", heavy_ball_map(hb, hb.alpha, 0.6), np.array([0.3])),
        ("shifted", gd_map(ShiftedQuadratic(4), 0.5), np.arange(4.0)),
    ]


@pytest.mark.parametrize("name,T,u", _maps(), ids=lambda v: v if isinstance(v, str) else "")
def test_adjoint_identities(name, T, u, rng):
    for _ in range(100):
        x = rng.standard_normal(T.dim_x)
        v, w = rng.standard_normal(T.dim_x), rng.standard_normal(T.dim_x)
        p = rng.standard_normal(T.dim_u)
        lhs, rhs = w @ T.jvp_x(x, u, v), T.vjp_x(x, u, w) @ v
        assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), np.linalg.norm(w) * np.linalg.norm(v))
        lhs, rhs = w @ T.jvp_u(x, u, p), T.vjp_u(x, u, w) @ p
        assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), np.linalg.norm(w) * np.linalg.norm(p))


@pytest.mark.parametrize("name,T,u", _maps(), ids=lambda v: v if isinstance(v, str) else "")
def test_finite_difference_consistency(name, T, u, rng):
    for _ in range(10):
        x = rng.standard_normal(T.dim_x)
        v = rng.standard_normal(T.dim_x)
        p = rng.standard_normal(T.dim_u)
        fd_x = central_diff(lambda y: T.eval(y, u), x, v)
        assert rel_err(T.jvp_x(x, u, v), fd_x) <= 1e-4
        fd_u = central_diff(lambda q: T.eval(x, q), u, p)
        assert rel_err(T.jvp_u(x, u, p), fd_u) <= 1e-4


def test_gd_ridge_one_step_exact():
    T = gd_map(RidgeLS(np.eye(1), np.zeros(1), 1.0))
    for x in (-3.0, 0.0, 2.5):
        assert T.eval(np.array([x]), np.array([0.0]))[0] == 0.0


def test_gd_shifted_quadratic_affine():
    T = gd_map(ShiftedQuadratic(1), 0.5)
    assert T.eval(np.array([3.0]), np.array([1.0]))[0] == pytest.approx(2.0)
    assert T.solution(np.array([1.7]))[0] == pytest.approx(1.7)


def test_gd_ridge_formula(ridge_small, rng):
    T = gd_map(ridge_small)
    x, u = rng.standard_normal(10), np.array([1.0])
    A, b = ridge_small.A, ridge_small.b
    expected = x - ridge_small.alpha * (A.T @ (A @ x - b) + x)
    assert np.allclose(T.eval(x, u), expected, rtol=1e-13, atol=1e-13)


def test_heavy_ball_examples():
    f = ShiftedQuadratic(1)
    T = heavy_ball_map(f, 0.5, 0.5)
    assert np.allclose(T.eval(np.array([1.0, 0.0]), np.array([0.0])), [1.0, 1.0])
    gd = gd_map(f, 0.5)
    hb0 = heavy_ball_map(f, 0.5, 0.0)
    z, u = np.array([2.0, -1.0]), np.array([0.4])
    out = hb0.eval(z, u)
    assert out[0] == gd.eval(z[:1], u)[0]
    assert out[1] == z[0]


def test_heavy_ball_rejects_bad_beta(ridge_small):
    with pytest.raises(InvalidRange):
        heavy_ball_map(ridge_small, 0.1, 1.0)


def test_ridge_solution_examples():
    p = RidgeLS(np.eye(2), np.array([1.0, 2.0]), 0.5)
    assert np.allclose(ridge_solution_oracle(p, [0.0]), [1.0, 2.0])
    assert np.allclose(ridge_solution_oracle(p, [1.0]), [0.5, 1.0])


def test_ridge_solution_stationary(ridge_small):
    u = np.array([1.0])
    x = ridge_solution_oracle(ridge_small, u)
    assert np.linalg.norm(ridge_small.grad(x, u)) <= 1e-9


def test_ridge_solution_stationary_data_mode():
    p = ridge_instance(10, seed=5, scalar_ridge=False)
    u = p.default_u()
    x = ridge_solution_oracle(p, u)
    assert np.linalg.norm(p.grad(x, u)) <= 1e-9


def test_ridge_jacobian_examples():
    p = RidgeLS(np.eye(1), np.array([1.0]), 0.5)
    assert ridge_solution_jacobian_oracle(p, [0.0], [1.0])[0] == pytest.approx(-1.0)
    assert np.all(ridge_solution_jacobian_oracle(p, [0.0], [0.0]) == 0.0)


@pytest.mark.parametrize("scalar", [True, False])
def test_ridge_jacobian_vs_finite_differences(scalar, rng):
    p = ridge_instance(10, seed=6, scalar_ridge=scalar)
    u = np.array([1.0]) if scalar else p.default_u()
    d = rng.standard_normal(p.dim_u)
    fd = central_diff(lambda q: ridge_solution_oracle(p, q), u, d)
    assert rel_err(ridge_solution_jacobian_oracle(p, u, d), fd) <= 1e-4


@pytest.mark.parametrize("scalar", [True, False])
def test_solution_vjp_is_adjoint_of_jvp(scalar, rng):
    p = ridge_instance(6, seed=7, M=15, scalar_ridge=scalar)
    u = np.array([0.5]) if scalar else p.default_u()
    T = gd_map(p)
    for _ in range(5):
        d, w = rng.standard_normal(p.dim_u), rng.standard_normal(p.dim_x)
        assert w @ T.solution_jvp(u, d) == pytest.approx(T.solution_vjp(u, w) @ d, rel=1e-10)


def test_generic_ift_fallback_matches_closed_form(rng):
    Q = np.array([[0.5, 0.1], [0.0, 0.3]])
    B = rng.standard_normal((2, 3))
    T = AffineMap(Q, B)
    u, d = rng.standard_normal(3), rng.standard_normal(3)
    expected = np.linalg.solve(np.eye(2) - Q, B @ d)
    assert np.allclose(T.solution_jvp(u, d), expected, rtol=1e-12)
    assert np.allclose(T.solution(u), np.linalg.solve(np.eye(2) - Q, B @ u), rtol=1e-12)


def test_jacobians_by_basis_stacking(ridge_small):
    T = gd_map(ridge_small)
    x, u = np.ones(10), np.array([0.2])
    J = T.jacobian_x(x, u)
    expected = np.eye(10) - ridge_small.alpha * ridge_small.hessian(u)
    assert np.allclose(J, expected, rtol=0, atol=1e-14)
    assert T.jacobian_u(x, u).shape == (10, 1)


def test_contraction_factor_matches_conditioning():
    p0 = ridge_instance(10, seed=8)
    u = np.array([0.3])
    m, L = spectral_extremes_sym(p0.hessian(u))
    p = RidgeLS(p0.A, p0.b, 2.0 / (L + m))
    J = gd_map(p).jacobian_x(np.zeros(10), u)
    assert spectral_norm(J) == pytest.approx((L - m) / (L + m), abs=1e-8)


def test_heavy_ball_not_a_euclidean_contraction():
    # scalar quadratic with curvature 1: spectral radius sqrt(beta) < 1 but ||J|| > 1
    T = heavy_ball_map(ShiftedQuadratic(1), 0.9, 0.8)
    J = T.jacobian_x(np.zeros(2), np.zeros(1))
    radius = np.max(np.abs(np.linalg.eigvals(J)))
    assert radius < 1.0
    assert spectral_norm(J) >= 1.0


def test_dimension_checks(ridge_small):
    T = gd_map(ridge_small)
    with pytest.raises(DimensionMismatch):
        T.eval(np.zeros(3), np.array([0.0]))
    with pytest.raises(DimensionMismatch):
        T.eval(np.zeros(10), np.zeros(2))
    with pytest.raises(InvalidRange):
        ridge_small.unpack([-1.0])
