"""Deterministic desk-scale experiments on random least-squares problems.

Instances are drawn the same way every time: ``A`` has i.i.d.
``U(0, 1)`` entries, ``b`` i.i.d. standard normal entries (Box-Muller), and
the parameter is the data itself, ``u = vec(A) ++ b``. For every instance and
truncation fraction ``f`` the grid

* picks ``K = min(ceil(ln(tol) / ln(rho*)), K_cap)`` with
  ``rho* = (L - m) / (L + m)``,
* reallocates ``T = floor(f K)`` derivative steps under a fixed budget,
* runs gradient descent for ``K'`` steps and differentiates the last
  ``K - T`` of them in forward and reverse mode,
* records iterate, derivative and bound errors for ``k = T' .. K'``.

Random numbers come from numpy's PCG64 generator. Each ``(seed, dim,
repetition)`` triple gets its own stream through ``SeedSequence`` hashing,
so results do not depend on the order in which the grid is walked.
"""

import argparse
import csv
import math
import statistics
import sys
from collections import defaultdict
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .analysis import constants_for_ridge, late_start_bound_series
from .bilevel import BilevelConfig, QuadraticLoss, run_bilevel
from .densela import spectral_extremes_sym
from .errors import EmptyGroup, InvalidRange, UnrollingError
from .fixmap import RidgeLS, gd_map
from .planner import (OMEGA_REVERSE, TruncationObjective, make_plan, objective_h,
                      optimal_T_discrete, optimal_T_relaxed)
from .solver import StopRule, Trajectory, iterate_errors, run_fpi
from .unrollad import (forward_error_series, forward_unroll, reverse_error_series,
                       reverse_unroll)

ALPHA_KINDS = ("optimal", "suboptimal")
DEFAULT_FRACTIONS = tuple(round(0.1 * i, 1) for i in range(9))
CSV_HEADER = ("experiment_id", "dim", "alpha_kind", "T_fraction", "T", "K", "K_prime", "k",
              "iterate_error", "forward_error", "reverse_error", "bound_value")
RATES_HEADER = ("dim", "alpha_kind", "rho")
EQUIVALENCE_TOL = 1e-10


@dataclass
class ExperimentConfig:
    M_rows: int = 50
    dims: tuple = (2, 5, 10, 20, 30, 40)
    alpha_kinds: tuple = ALPHA_KINDS
    truncation_fractions: tuple = DEFAULT_FRACTIONS
    omega: float = OMEGA_REVERSE
    repetitions: int = 20
    target_tol: float = 1e-3
    K_cap: int = 1000
    seed: int = 0
    random_probes: bool = False

    def __post_init__(self):
        if any(not 0 <= f < 1 for f in self.truncation_fractions):
            raise InvalidRange("truncation fractions must lie in [0, 1)")
        if self.repetitions < 1:
            raise InvalidRange("repetitions must be at least 1")
        if not 0 < self.target_tol < 1:
            raise InvalidRange("target_tol must lie in (0, 1)")
        if any(kind not in ALPHA_KINDS for kind in self.alpha_kinds):
            raise InvalidRange(f"alpha kinds must be among {ALPHA_KINDS}")
        if any(not self.M_rows >= n >= 1 for n in self.dims):
            raise InvalidRange("need M_rows >= N >= 1 for every dimension")
        if self.K_cap < 1:
            raise InvalidRange("K_cap must be at least 1")


class ExperimentRecord(NamedTuple):
    experiment_id: str
    dim: int
    alpha_kind: str
    T_fraction: float
    T: int
    K: int
    K_prime: int
    k: int
    iterate_error: float
    forward_error: float
    reverse_error: float
    bound_value: float
    repetition: int = -1


class RateRecord(NamedTuple):
    dim: int
    alpha_kind: str
    repetition: int
    rho: float


@dataclass
class GridResult:
    records: list = field(default_factory=list)
    rates: list = field(default_factory=list)


# -- instances ---------------------------------------------------------------

def make_rng(seed):
    """PCG64 generator for an integer seed or a tuple of integers (hashed)."""
    entropy = list(seed) if isinstance(seed, (tuple, list)) else int(seed)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def box_muller(rng, n):
    """``n`` standard normal draws from pairs of uniforms."""
    pairs = (n + 1) // 2
    u1 = rng.random(pairs)
    u2 = rng.random(pairs)
    radius = np.sqrt(-2.0 * np.log1p(-u1))
    angle = 2.0 * np.pi * u2
    z = np.empty(2 * pairs)
    z[0::2] = radius * np.cos(angle)
    z[1::2] = radius * np.sin(angle)
    return z[:n]


def generate_data(M_rows, N, seed):
    if not M_rows >= N >= 1:
        raise InvalidRange("need M_rows >= N >= 1")
    rng = make_rng(seed)
    A = rng.random((M_rows, N))
    b = box_muller(rng, M_rows)
    return A, b


def step_size(L, m, alpha_kind):
    if alpha_kind == "optimal":
        return 2.0 / (L + m)
    if alpha_kind == "suboptimal":
        return 1.0 / (3.0 * L)
    raise InvalidRange(f"unknown alpha kind {alpha_kind!r}")


def generate_instance(M_rows, N, seed, alpha_kind="optimal", scalar_ridge=False):
    """Random least-squares instance with the chosen step size."""
    A, b = generate_data(M_rows, N, seed)
    m, L = spectral_extremes_sym(A.T @ A)
    return RidgeLS(A, b, step_size(L, m, alpha_kind), scalar_ridge=scalar_ridge)


def iteration_count(L, m, target_tol, K_cap):
    """``min(ceil(ln(tol) / ln(rho*)), K_cap)``, at least one step."""
    rho_star = (L - m) / (L + m)
    if rho_star <= 0.0:
        return 1
    return int(max(1, min(math.ceil(math.log(target_tol) / math.log(rho_star)), K_cap)))


# -- grid --------------------------------------------------------------------

def _unit(v):
    return v / np.linalg.norm(v)


def _slice(traj, k_final):
    return Trajectory(traj.iterates[:k_final + 1], traj.u, k_final, traj.stop_reason)


def run_instance(cfg, dim, rep):
    """Records and rates for one ``(dim, repetition)`` instance."""
    A, b = generate_data(cfg.M_rows, dim, (cfg.seed, dim, rep))
    m, L = spectral_extremes_sym(A.T @ A)
    K = iteration_count(L, m, cfg.target_tol, cfg.K_cap)
    plans = [(f, make_plan(K, math.floor(f * K), cfg.omega)) for f in cfg.truncation_fractions]
    K_max = max(plan.K_prime for _, plan in plans)

    records, rates = [], []
    for kind in cfg.alpha_kinds:
        p = RidgeLS(A, b, step_size(L, m, kind), scalar_ridge=False)
        problem = gd_map(p)
        u = p.default_u()
        if cfg.random_probes:
            probe_rng = make_rng((cfg.seed, dim, rep, 1))
            p_u = _unit(box_muller(probe_rng, p.dim_u))
            w = _unit(box_muller(probe_rng, p.dim_x))
        else:
            p_u = _unit(np.ones(p.dim_u))
            w = _unit(np.ones(p.dim_x))

        x0 = np.zeros(dim)
        full = run_fpi(problem, u, x0, StopRule(max_iters=K_max))
        x_star = p.solution(u)
        eps = iterate_errors(full, x_star)
        oracle_jvp = p.solution_jvp(u, p_u)
        oracle_vjp = p.solution_vjp(u, w)
        consts = constants_for_ridge(p, u, trajectory=full, direction=p_u)
        rates.append(RateRecord(dim, kind, rep, consts.rho))
        exp_id = f"N{dim}-{kind}-r{rep}"

        for f, plan in plans:
            traj = _slice(full, plan.K_prime)
            fwd = forward_unroll(problem, traj, p_u, late_start=plan.T_prime)
            rev = reverse_unroll(problem, traj, w, plan.T_prime)
            lhs, rhs = w @ fwd.output, rev.output @ p_u
            scale = np.linalg.norm(fwd.output) + np.linalg.norm(rev.output) + 1e-300
            if abs(lhs - rhs) > EQUIVALENCE_TOL * scale:
                raise RuntimeError(f"{exp_id}: forward/reverse outputs disagree at T={plan.T}")
            fwd_err = forward_error_series(fwd, oracle_jvp)
            rev_err = reverse_error_series(rev, oracle_vjp)
            bound = late_start_bound_series(consts, plan.derivative_iters, plan.T_prime)
            for j in range(plan.derivative_iters + 1):
                k = plan.T_prime + j
                records.append(ExperimentRecord(
                    exp_id, dim, kind, float(f), plan.T, K, plan.K_prime, k,
                    float(eps[k]), float(fwd_err[j]), float(rev_err[j]), float(bound[j]), rep))
    return records, rates


def _record_key(r):
    return (r.dim, r.alpha_kind, r.T, r.repetition, r.T_fraction, r.k)


def run_grid(cfg):
    """Run every ``(dim, repetition)`` instance; records come back in canonical order."""
    result = GridResult()
    for dim in cfg.dims:
        for rep in range(cfg.repetitions):
            records, rates = run_instance(cfg, dim, rep)
            result.records.extend(records)
            result.rates.extend(rates)
    result.records.sort(key=_record_key)
    result.rates.sort(key=lambda r: (r.dim, r.alpha_kind, r.repetition))
    return result


def aggregate_median(records):
    """Lower median of every error column per ``(dim, alpha_kind, T_fraction, k)``.

    Instances of the same dimension may have different ``K``, so rows are
    grouped by truncation fraction rather than by absolute ``T``; ``T``,
    ``K`` and ``K_prime`` of the output are lower medians too.
    """
    groups = defaultdict(list)
    for r in records:
        groups[(r.dim, r.alpha_kind, r.T_fraction, r.k)].append(r)
    if not groups:
        raise EmptyGroup("no records to aggregate")
    out = []
    for (dim, kind, frac, k), rows in sorted(groups.items()):
        def med(name):
            return statistics.median_low([getattr(r, name) for r in rows])
        out.append(ExperimentRecord(
            "median", dim, kind, frac, med("T"), med("K"), med("K_prime"), k,
            med("iterate_error"), med("forward_error"), med("reverse_error"), med("bound_value")))
    return out


def series(records, dim, alpha_kind, T_fraction, column):
    """``(k, values)`` arrays of one column for a fixed group, ordered by ``k``."""
    rows = sorted((r for r in records
                   if r.dim == dim and r.alpha_kind == alpha_kind and r.T_fraction == T_fraction),
                  key=lambda r: r.k)
    return np.array([r.k for r in rows]), np.array([getattr(r, column) for r in rows])


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_csv(records, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in records:
            writer.writerow([_fmt(getattr(r, name)) for name in CSV_HEADER])


def emit_rates(rates, path):
    """One ``dim,alpha_kind,rho`` line per group, ``rho`` being the lower median over repetitions."""
    groups = defaultdict(list)
    for r in rates:
        groups[(r.dim, r.alpha_kind)].append(r.rho)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RATES_HEADER)
        for (dim, kind), rhos in sorted(groups.items()):
            writer.writerow([dim, kind, repr(float(statistics.median_low(rhos)))])


# -- bilevel demo problem -------------------------------------------------------

def ridge_bilevel_problem(dim=10, M_rows=50, seed=0):
    """Ridge weight tuning: training data in the inner problem, validation data in the loss.

    Returns ``(map, loss, objective)``; the step ``1 / L`` keeps the inner map
    contractive for every ridge weight in ``[0, L)``.
    """
    A, b = generate_data(M_rows, dim, (seed, dim, 0))
    A_val, b_val = generate_data(M_rows, dim, (seed, dim, 1))
    _, L = spectral_extremes_sym(A.T @ A)
    objective = RidgeLS(A, b, 1.0 / L, scalar_ridge=True)
    return gd_map(objective), QuadraticLoss(A_val, b_val), objective


def emit_bilevel_trace(trace, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["round", "u", "K", "loss", "hypergradient", "init_error", "cap_reached"])
        for r, rec in enumerate(trace.rounds):
            writer.writerow([r, ";".join(repr(float(v)) for v in rec.u), rec.K, repr(rec.loss),
                             ";".join(repr(float(v)) for v in rec.hypergradient),
                             repr(rec.init_error), int(rec.cap_reached)])


# -- command line ---------------------------------------------------------------

def _int_list(text):
    return tuple(int(t) for t in text.split(",") if t)


def _float_list(text):
    return tuple(float(t) for t in text.split(",") if t)


def _alpha_kinds(text):
    if text == "both":
        return ALPHA_KINDS
    return tuple(t for t in text.split(",") if t)


def build_parser():
    parser = argparse.ArgumentParser(prog="bench", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    d = ExperimentConfig()
    run = sub.add_parser("run", help="run the truncation grid and write CSV files")
    run.add_argument("--dims", type=_int_list, default=d.dims)
    run.add_argument("--alpha", type=_alpha_kinds, default=d.alpha_kinds,
                     help="optimal, suboptimal, both or a comma list")
    run.add_argument("--fractions", type=_float_list, default=d.truncation_fractions)
    run.add_argument("--omega", type=float, default=d.omega)
    run.add_argument("--reps", type=int, default=d.repetitions)
    run.add_argument("--seed", type=int, default=d.seed)
    run.add_argument("--tol", type=float, default=d.target_tol)
    run.add_argument("--kcap", type=int, default=d.K_cap)
    run.add_argument("--mrows", type=int, default=d.M_rows)
    run.add_argument("--random-probes", action="store_true")
    run.add_argument("--out", required=True)
    run.add_argument("--rates")
    run.add_argument("--medians", help="also write per-group lower medians here")

    plan = sub.add_parser("plan", help="optimal truncation index for given bound constants")
    plan.add_argument("--rho", type=float, required=True)
    plan.add_argument("--K", type=int, required=True)
    plan.add_argument("--omega", type=float, default=OMEGA_REVERSE)
    plan.add_argument("--fwd0", type=float, required=True)
    plan.add_argument("--gamma", type=float, required=True)
    plan.add_argument("--eps0", type=float, required=True)

    bil = sub.add_parser("bilevel", help="ridge-weight tuning with warm or cold inner starts")
    mode = bil.add_mutually_exclusive_group(required=True)
    mode.add_argument("--warm", dest="warm", action="store_true")
    mode.add_argument("--cold", dest="warm", action="store_false")
    bil.add_argument("--rounds", type=int, default=20)
    bil.add_argument("--eps", type=float, default=1e-8)
    bil.add_argument("--tau", type=float, default=1e-3)
    bil.add_argument("--seed", type=int, default=0)
    bil.add_argument("--dim", type=int, default=10)
    bil.add_argument("--mrows", type=int, default=50)
    bil.add_argument("--u0", type=float, default=1.0)
    bil.add_argument("--inner-cap", type=int, default=10_000)
    bil.add_argument("--out", required=True)
    return parser


def _cmd_run(args):
    cfg = ExperimentConfig(M_rows=args.mrows, dims=args.dims, alpha_kinds=args.alpha,
                           truncation_fractions=args.fractions, omega=args.omega,
                           repetitions=args.reps, target_tol=args.tol, K_cap=args.kcap,
                           seed=args.seed, random_probes=args.random_probes)
    result = run_grid(cfg)
    emit_csv(result.records, args.out)
    if args.rates:
        emit_rates(result.rates, args.rates)
    if args.medians:
        emit_csv(aggregate_median(result.records), args.medians)
    print(f"wrote {len(result.records)} rows to {args.out}")


def _cmd_plan(args):
    obj = TruncationObjective.from_bound(args.rho, args.K, args.fwd0, args.gamma, args.eps0, args.omega)
    t_disc, h_disc = optimal_T_discrete(obj)
    t_relax = optimal_T_relaxed(obj)
    plan = make_plan(args.K, t_disc, args.omega)
    print(f"T* (discrete) = {t_disc}  bound = {h_disc!r}")
    print(f"T* (relaxed)  = {t_relax!r}")
    print(f"plan: K'={plan.K_prime} T'={plan.T_prime} derivative_iters={plan.derivative_iters}")
    print("T,bound")
    for T in range(args.K + 1):
        print(f"{T},{objective_h(obj, T)!r}")


def _cmd_bilevel(args):
    problem, loss, _ = ridge_bilevel_problem(args.dim, args.mrows, args.seed)
    cfg = BilevelConfig(R=args.rounds, eps=args.eps, step_sizes=args.tau,
                        x0=np.zeros(args.dim), u0=np.array([args.u0]),
                        warm_start=args.warm, inner_cap=args.inner_cap)
    trace = run_bilevel(problem, loss, cfg)
    emit_bilevel_trace(trace, args.out)
    print(f"{'warm' if args.warm else 'cold'}: {int(trace.inner_iterations.sum())} inner iterations, "
          f"final u = {trace.u_final.tolist()}")


def main(argv=None):
    args = build_parser().parse_args(argv)
    handlers = {"run": _cmd_run, "plan": _cmd_plan, "bilevel": _cmd_bilevel}
    try:
        handlers[args.command](args)
    except (UnrollingError, ValueError, OSError, RuntimeError) as exc:
        print(f"bench: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
