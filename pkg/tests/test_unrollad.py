import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import ridge_instance
from oracles import central_diff, dense_unrolled_jacobian, unroll_composite
from unrolling.bench import generate_instance, iteration_count
from unrolling.densela import spectral_extremes_sym
from unrolling.errors import EmptySeries, IndexOutOfRange, NoTape
from unrolling.fixmap import AffineMap, gd_map, heavy_ball_map
from unrolling.planner import make_plan
from unrolling.solver import StopRule, run_fpi
from unrolling.unrollad import (
    curse_indices,
    forward_error_series,
    forward_unroll,
    reverse_error_series,
    reverse_unroll,
)


def scalar_run(K=3):
    T = AffineMap([[0.5]], [[1.0]])
    return T, run_fpi(T, [1.0], [0.0], StopRule(max_iters=K))


def test_forward_scalar_example():
    T, traj = scalar_run()
    fwd = forward_unroll(T, traj, [1.0])
    assert np.allclose(fwd.values[:, 0], [0.0, 1.0, 1.5, 1.75], rtol=0, atol=0)
    assert np.allclose(forward_error_series(fwd, [2.0]), [2.0, 1.0, 0.5, 0.25])


def test_forward_late_start_at_end_is_degenerate():
    T, traj = scalar_run()
    fwd = forward_unroll(T, traj, [1.0], x0_dot=[0.3], late_start=traj.k_final)
    assert fwd.n_steps == 0
    assert fwd.output[0] == 0.3


def test_forward_late_start_out_of_range():
    T, traj = scalar_run()
    with pytest.raises(IndexOutOfRange):
        forward_unroll(T, traj, [1.0], late_start=4)
    with pytest.raises(IndexOutOfRange):
        reverse_unroll(T, traj, [1.0], stop_index=-1)


def test_no_tape_is_rejected():
    T = AffineMap([[0.5]], [[1.0]])
    traj = run_fpi(T, [1.0], [0.0], StopRule(max_iters=3), record_tape=False)
    with pytest.raises(NoTape):
        forward_unroll(T, traj, [1.0])
    with pytest.raises(NoTape):
        reverse_unroll(T, traj, [1.0])


def test_reverse_single_step():
    T = AffineMap([[0.5, 0.0], [0.2, 0.1]], [[1.0, 2.0, 0.0], [0.0, 1.0, 3.0]])
    traj = run_fpi(T, np.ones(3), np.zeros(2), StopRule(max_iters=1))
    w = np.array([0.7, -1.1])
    rev = reverse_unroll(T, traj, w, 0)
    assert np.allclose(rev.output, w @ T.B, rtol=1e-15)
    assert np.array_equal(rev.ubar[-1], np.zeros(3))
    assert np.array_equal(rev.xbar[-1], w)


def test_reverse_zero_seed():
    T, traj = scalar_run(5)
    rev = reverse_unroll(T, traj, [0.0])
    assert np.all(rev.ubar == 0.0) and np.all(rev.xbar == 0.0)
    assert np.all(reverse_error_series(rev, [0.0]) == 0.0)


def test_reverse_empty_chain_error_is_oracle_norm():
    T, traj = scalar_run(3)
    rev = reverse_unroll(T, traj, [1.0], stop_index=3)
    errs = reverse_error_series(rev, [2.0])
    assert errs.tolist() == [2.0]


def test_reverse_at_indexing():
    T, traj = scalar_run(4)
    rev = reverse_unroll(T, traj, [1.0], stop_index=1)
    assert rev.k_final == 4
    xb, ub = rev.at(4)
    assert xb[0] == 1.0 and ub[0] == 0.0
    # ubar^k = sum_{j=k}^{K-1} 0.5^{K-1-j}
    assert rev.at(1)[1][0] == pytest.approx(1 + 0.5 + 0.25)
    with pytest.raises(IndexOutOfRange):
        rev.at(0)


def test_forward_matches_dense_jacobian_product(rng):
    p = ridge_instance(5, seed=13, M=8, scalar_ridge=False)
    T, u = gd_map(p), p.default_u()
    traj = run_fpi(T, u, rng.standard_normal(5), StopRule(max_iters=12))
    Js = [T.jacobian_x(x, u) for x in traj.iterates[:-1]]
    Bs = [T.jacobian_u(x, u) for x in traj.iterates[:-1]]
    d = rng.standard_normal(p.dim_u)
    for t_prime in (0, 4, 12):
        # late start applies the step Jacobians of tape entries T' .. K-1
        D = dense_unrolled_jacobian(Js, Bs, start=t_prime)
        fwd = forward_unroll(T, traj, d, late_start=t_prime)
        assert np.allclose(fwd.output, D @ d, rtol=1e-12, atol=1e-12)


def _equivalence_case(seed, K, frac, kind):
    rng = np.random.default_rng(seed)
    if kind == "heavy-ball":
        base = ridge_instance(4, seed=seed % 97, M=9)
        T = heavy_ball_map(base, base.alpha, 0.5)
        u = np.array([rng.uniform(0, 1)])
    elif kind == "data":
        base = ridge_instance(4, seed=seed % 97, M=9, scalar_ridge=False)
        T, u = gd_map(base), base.default_u()
    else:
        base = ridge_instance(6, seed=seed % 97)
        T, u = gd_map(base), np.array([rng.uniform(0, 2)])
    traj = run_fpi(T, u, rng.standard_normal(T.dim_x), StopRule(max_iters=K))
    t_prime = int(frac * K)
    p = rng.standard_normal(T.dim_u)
    w = rng.standard_normal(T.dim_x)
    fwd = forward_unroll(T, traj, p, late_start=t_prime)
    rev = reverse_unroll(T, traj, w, t_prime)
    return w @ fwd.output, rev.output @ p, np.linalg.norm(w) * np.linalg.norm(fwd.output) + abs(rev.output @ p)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), K=st.integers(1, 120),
       frac=st.sampled_from([0.0, 0.25, 0.5, 1.0]),
       kind=st.sampled_from(["scalar", "data", "heavy-ball"]))
def test_forward_reverse_equivalence(seed, K, frac, kind):
    lhs, rhs, scale = _equivalence_case(seed, K, frac, kind)
    assert abs(lhs - rhs) <= 1e-10 * max(scale, 1e-300)


@pytest.mark.parametrize("scalar", [True, False])
def test_reverse_hypergradient_vs_finite_differences(scalar, rng):
    p = ridge_instance(6, seed=14, M=20, scalar_ridge=scalar)
    T = gd_map(p)
    u = np.array([0.4]) if scalar else p.default_u()
    x0, K = rng.standard_normal(6), 40
    w, d = rng.standard_normal(6), rng.standard_normal(p.dim_u)
    traj = run_fpi(T, u, x0, StopRule(max_iters=K))
    rev = reverse_unroll(T, traj, w, 0)
    fd = central_diff(lambda q: w @ unroll_composite(T, q, x0, K), u, d)
    assert rev.output @ d == pytest.approx(float(fd), rel=1e-4)


def test_forward_converges_to_oracle_with_enough_iterations():
    p = ridge_instance(10, seed=15)
    T, u = gd_map(p), np.array([0.0])
    traj = run_fpi(T, u, np.zeros(10), StopRule(max_iters=1500))
    fwd = forward_unroll(T, traj, [1.0])
    errs = forward_error_series(fwd, p.solution_jvp(u, [1.0]))
    assert errs[-1] <= 1e-3 * errs[0]


def _n30_series(seed, kind="optimal"):
    p = generate_instance(50, 30, (0, 30, seed), kind)
    T, u = gd_map(p), p.default_u()
    m, L = spectral_extremes_sym(p.A.T @ p.A)
    K = iteration_count(L, m, 1e-3, 1000)
    traj = run_fpi(T, u, np.zeros(30), StopRule(max_iters=K))
    p_u = np.ones(p.dim_u) / np.sqrt(p.dim_u)
    w = np.ones(30) / np.sqrt(30)
    fwd = forward_error_series(forward_unroll(T, traj, p_u), p.solution_jvp(u, p_u))
    rev = reverse_error_series(reverse_unroll(T, traj, w), p.solution_vjp(u, w))
    return T, traj, p, u, p_u, K, fwd, rev


def test_curse_on_n30_optimal_step():
    *_, fwd, rev = _n30_series(0)
    k_dot, k_bar = curse_indices(fwd, rev)
    assert k_dot >= 1
    assert fwd.max() > fwd[0]
    assert k_bar > 0
    # the reverse error rises again as k approaches 0
    assert rev[0] > rev[k_bar]


def test_late_start_suppresses_peak_on_n30():
    T, traj, p, u, p_u, K, fwd0, _ = _n30_series(0)
    plan = make_plan(K, int(0.4 * K), 3.0)
    long = run_fpi(T, u, np.zeros(30), StopRule(max_iters=plan.K_prime))
    late = forward_unroll(T, long, p_u, late_start=plan.T_prime)
    late_err = forward_error_series(late, p.solution_jvp(u, p_u))
    assert late_err.max() < fwd0.max()


def test_curse_grows_with_dimension():
    def k_dot(N, seed):
        p = generate_instance(50, N, (0, N, seed), "optimal")
        T, u = gd_map(p), p.default_u()
        m, L = spectral_extremes_sym(p.A.T @ p.A)
        traj = run_fpi(T, u, np.zeros(N), StopRule(max_iters=iteration_count(L, m, 1e-3, 1000)))
        p_u = np.ones(p.dim_u) / np.sqrt(p.dim_u)
        errs = forward_error_series(forward_unroll(T, traj, p_u), p.solution_jvp(u, p_u))
        return int(np.argmax(errs))

    small = np.median([k_dot(2, s) for s in range(3)])
    large = np.median([k_dot(40, s) for s in range(3)])
    assert large > small


def test_curse_indices_examples():
    assert curse_indices([3.0, 2.0, 1.0], [1.0]) == (0, 0)
    assert curse_indices([1.0, 3.0, 2.0], [2.0, 1.0, 1.0, 4.0]) == (1, 1)
    with pytest.raises(EmptySeries):
        curse_indices([], [1.0])
    with pytest.raises(EmptySeries):
        curse_indices([1.0], [])


def test_error_series_at_oracle_is_zero():
    T, traj = scalar_run(3)
    fwd = forward_unroll(T, traj, [1.0], x0_dot=[2.0])
    assert np.all(forward_error_series(fwd, [2.0]) == 0.0)


def test_error_series_dimension_check():
    T, traj = scalar_run(3)
    fwd = forward_unroll(T, traj, [1.0])
    with pytest.raises(ValueError):
        forward_error_series(fwd, [1.0, 2.0])
