"""Acceptance criteria, each run at its stated tolerance.

Every test records one PASS/FAIL line; the lines are repeated in the
terminal summary.  Benchmark runs are shared between criteria through
module-scoped fixtures.
"""

import math
import time

import numpy as np
import pytest

from conftest import record_criterion
from ibpdca import core, l12con, l12reg
from ibpdca.baselines import PdcaeParams, fista_l1ls, pdcae_solve, power_method_lmax
from ibpdca.datagen import gen_instance
from ibpdca.errors import IBPDCAError
from ibpdca.prox import project_l2_ball, prox_box_l1, soft_threshold
from ibpdca.runner import RunSpec, solve
from test_l12con import subdiff_audit

pytestmark = pytest.mark.slow

FRESH_SEEDS = range(1000, 1020)


# ------------------------------------------------------------ criterion 1

def grid_refine(obj, lo, hi, points=201, rounds=7):
    """Vectorized grid-refinement minimizer of convex 1-D functions.

    ``obj(T)`` maps an array of shape (cases, points) to objective values;
    ``lo``/``hi`` are per-case search intervals.
    """
    lo0, hi0 = lo.copy(), hi.copy()
    for _ in range(rounds):
        T = lo[:, None] + (hi - lo)[:, None] * np.linspace(0, 1, points)[None, :]
        i = np.argmin(obj(T), axis=1)
        c = T[np.arange(len(T)), i]
        h = (hi - lo) / (points - 1)
        lo, hi = np.maximum(c - 2 * h, lo0), np.minimum(c + 2 * h, hi0)
    return c


def test_criterion_1_prox_oracles():
    rng = np.random.default_rng(1)
    N = 10_000
    t0 = time.perf_counter()
    y = rng.normal(scale=3, size=N)
    nu = rng.uniform(0, 3, size=N)
    M = rng.uniform(0.1, 5, size=N)
    kap = rng.uniform(0.1, 5, size=N)
    span_lo, span_hi = np.minimum(y, 0) - 1, np.maximum(y, 0) + 1

    errs = {}
    got = np.array([soft_threshold([a], b)[0] for a, b in zip(y, nu)])
    ref = grid_refine(lambda T: nu[:, None] * np.abs(T) + 0.5 * (T - y[:, None]) ** 2,
                      span_lo, span_hi)
    errs["soft"] = np.abs(got - ref).max()

    got = np.array([prox_box_l1([a], b, c)[0] for a, b, c in zip(y, nu, M)])
    ref = grid_refine(lambda T: nu[:, None] * np.abs(T) + 0.5 * (T - y[:, None]) ** 2,
                      np.maximum(span_lo, -M), np.minimum(span_hi, M))
    errs["box"] = np.abs(got - ref).max()

    got = np.array([project_l2_ball([a], c)[0] for a, c in zip(y, kap)])
    ref = grid_refine(lambda T: 0.5 * (T - y[:, None]) ** 2, -kap, kap)
    errs["ball"] = np.abs(got - ref).max()
    elapsed = time.perf_counter() - t0

    ok = max(errs.values()) <= 1e-6 and elapsed < 10
    detail = ", ".join(f"{k} max err {v:.1e}" for k, v in errs.items())
    assert record_criterion(1, ok, f"{detail}; {elapsed:.1f} s (< 10 s)")


# ------------------------------------------------------------ criterion 2

def _fd_rel_error(model, z, h=1e-6):
    fd = np.array([(model.value(z + h * e) - model.value(z - h * e)) / (2 * h)
                   for e in np.eye(z.size)])
    g = model.gradient(z)
    return np.linalg.norm(fd - g) / np.linalg.norm(g)


def test_criterion_2_dual_gradients():
    t0 = time.perf_counter()
    worst = {"reg": 0.0, "con": 0.0}
    for i in range(100):
        rng = np.random.default_rng(2000 + i)
        inst = gen_instance(20, 100, 4, 2000 + i)
        p = l12reg.RegProblem(inst, rng.uniform(0.05, 1.0))
        x_k = rng.normal(size=100)
        model = l12reg.RegDualModel(p, x_k, p.p2_subgradient(x_k), rng.uniform(0.1, 1))
        worst["reg"] = max(worst["reg"], _fd_rel_error(model, rng.normal(size=20)))

        q = l12con.ConProblem(inst, nf=1.1)
        x_k = q.x_feas + 0.1 * rng.normal(size=100)
        model = l12con.ConDualModel(q, x_k, q.p2_subgradient(x_k), rng.uniform(0.1, 1))
        worst["con"] = max(worst["con"], _fd_rel_error(model, rng.normal(size=20)))
    elapsed = time.perf_counter() - t0
    ok = max(worst.values()) <= 1e-5 and elapsed < 30
    assert record_criterion(
        2, ok, f"max rel err reg {worst['reg']:.1e}, con {worst['con']:.1e} "
               f"(<= 1e-5); {elapsed:.1f} s (< 30 s)")


# ------------------------------------------------------------ criterion 4

def _capturing(subsolver, log):
    def wrapped(x_k, x_prev, xi, gamma, sigma, crit, z):
        res = subsolver(x_k, x_prev, xi, gamma, sigma, crit, z)
        log.append((x_k.copy(), x_prev.copy(), xi.copy(), sigma, res.certificate))
        return res
    return wrapped


def _sc_holds(c, x_k, x_prev, sigma, A=None):
    """The relative criterion written out from scratch."""
    d = c.x_next - x_k if c.criterion == "SC1" else x_k - x_prev
    D = 0.5 * d @ d + (0.5 * np.sum((A @ d) ** 2) if A is not None else 0.0)
    lhs = c.delta_vec @ c.delta_vec + abs(c.delta_vec @ (c.x_next - x_k)) + c.delta_scalar
    return c.delta_scalar >= 0 and lhs <= sigma * c.gamma * D


def _reg_inclusion_ok(p, x_k, xi, c, tol=1e-8):
    w = c.x_next
    r = c.delta_vec - (-xi + p.A.T @ (p.A @ w - p.b) + c.gamma * (w - x_k))
    nz = w != 0
    return (np.all(np.abs(r[nz] - p.lam * np.sign(w[nz])) <= tol)
            and np.all(np.abs(r[~nz]) <= p.lam + tol))


@pytest.fixture(scope="module")
def audit_runs():
    return []


def test_criterion_4_certificate_audit(audit_runs):
    rng = np.random.default_rng(4)
    checked, disagreements, audit_fail = 0, [], []
    for app in ("reg", "con"):
        for seed in range(50):
            inst = gen_instance(5, 20, 2, 4000 + seed)
            if app == "reg":
                p = l12reg.RegProblem(inst, 0.1)
                sub, x0 = l12reg.make_subsolver(p), fista_l1ls(p.A, p.b, 0.1)
            else:
                p = l12con.ConProblem(inst, nf=1.1)
                sub, x0 = l12con.make_subsolver(p), l12con.initial_point(p)
            for crit in ("SC1", "SC2"):
                log = []
                params = core.SolverParams(criterion=crit)
                rep = core.run(p, _capturing(sub, log), params, x0)
                audit_runs.append((f"{app}-{crit}-{seed}", rep, params))
                for x_k, x_prev, xi, sigma, c in log:
                    checked += 1
                    A = p.A if app == "con" else None
                    if not _sc_holds(c, x_k, x_prev, sigma, A):
                        disagreements.append(f"{app}/{crit}/seed {seed}")
                    if app == "reg":
                        if not _reg_inclusion_ok(p, x_k, xi, c):
                            audit_fail.append(f"reg/{crit}/seed {seed}")
                    else:
                        bad = subdiff_audit(p, c.parts, rng, samples=1000, tol=1e-8)
                        if bad:
                            audit_fail.append(f"con/{crit}/seed {seed}: {bad[0]}")
    ok = not disagreements and not audit_fail
    detail = (f"{checked} certificates rechecked, {len(disagreements)} disagreements, "
              f"{len(audit_fail)} subdifferential audit failures")
    if not ok:
        detail += f" (first: {(disagreements + audit_fail)[0]})"
    assert record_criterion(4, ok, detail)


# ------------------------------------------------------------ criterion 5

def _rel(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


@pytest.fixture(scope="module")
def reg_bench_runs():
    t0 = time.perf_counter()
    runs, errors = {}, []
    for seed in FRESH_SEEDS:
        inst = gen_instance(200, 2000, 40, seed)
        for lam, methods in ((0.1, ("ibpdca-sc1", "ibpdca-sc2", "pdcae")),
                             (1.0, ("ibpdca-sc1", "ibpdca-sc2"))):
            for method in methods:
                try:
                    runs[(seed, lam, method)] = solve(
                        inst, RunSpec(problem="l12reg", method=method, lam=lam))
                except IBPDCAError as exc:
                    errors.append(f"seed {seed} {method} lam={lam}: {exc}")
    return runs, errors, time.perf_counter() - t0


def test_criterion_5_regularized_benchmark(reg_bench_runs):
    runs, errors, elapsed = reg_bench_runs
    checks, notes = [], []
    if errors:
        notes.append(f"{len(errors)} failed runs ({errors[0]})")
    get = lambda seed, lam, m: runs.get((seed, lam, m))
    complete = [s for s in FRESH_SEEDS
                if all(get(s, 0.1, m) for m in ("ibpdca-sc1", "ibpdca-sc2", "pdcae"))]
    gaps = [(_rel(a.report.objective, b.report.objective), s)
            for s in complete
            for a, b in [(get(s, 0.1, "ibpdca-sc1"), get(s, 0.1, "ibpdca-sc2")),
                         (get(s, 0.1, "ibpdca-sc1"), get(s, 0.1, "pdcae")),
                         (get(s, 0.1, "ibpdca-sc2"), get(s, 0.1, "pdcae"))]]
    worst, worst_seed = max(gaps, default=(math.inf, None))
    checks.append(worst <= 1e-4)
    capped = sum(r.report.status == core.MAX_ITER for (s, l, m), r in runs.items()
                 if m == "pdcae")
    notes.append(f"max objective disagreement {worst:.1e} at seed {worst_seed} "
                 f"(<= 1e-4; pDCAe hit the iteration cap on {capped} runs)")
    sc = max((_rel(get(s, lam, "ibpdca-sc1").report.objective,
                   get(s, lam, "ibpdca-sc2").report.objective)
              for s in FRESH_SEEDS for lam in (0.1, 1.0)
              if get(s, lam, "ibpdca-sc1") and get(s, lam, "ibpdca-sc2")),
             default=math.inf)
    notes.append(f"SC1/SC2 gap {sc:.1e}")

    def avg(lam, method, f):
        vals = [f(r) for (s, l, m), r in runs.items() if l == lam and m == method]
        return sum(vals) / len(vals) if vals else math.nan

    obj = avg(0.1, "ibpdca-sc1", lambda r: r.report.objective)
    checks.append(2.54 / 2 <= obj <= 2.54 * 2)
    notes.append(f"avg obj {obj:.3g} (2.54 scale)")
    for m in ("ibpdca-sc1", "ibpdca-sc2"):
        it = avg(0.1, m, lambda r: r.report.outer_iters)
        ssn = avg(0.1, m, lambda r: r.report.inner_iters)
        it1 = avg(1.0, m, lambda r: r.report.outer_iters)
        checks += [15 <= it <= 60, 85 <= ssn <= 340, 5 <= it1 <= 18]
        notes.append(f"{m} outer {it:.1f} in [15,60], SSN {ssn:.1f} in [85,340], "
                     f"lam=1 outer {it1:.1f} in [5,18]")
    pd = avg(0.1, "pdcae", lambda r: r.report.outer_iters)
    checks.append(8353 / 2 <= pd <= 8353 * 2)
    notes.append(f"pDCAe iters {pd:.0f} in [4176, 16706]")
    unit = [r.report.unit_step_fraction for (s, l, m), r in runs.items() if m != "pdcae"]
    notes.append(f"unit-step fraction {np.nanmean(unit):.2f} (diagnostic)")
    checks.append(elapsed < 300)
    notes.append(f"{elapsed:.0f} s (< 300 s)")
    ok = all(checks) and not errors
    assert record_criterion(5, ok, "; ".join(notes))


# ------------------------------------------------------------ criterion 6

def exact_sub_reg(p, x_k, xi, gamma, tol=1e-12, max_iter=200000):
    """FISTA on the strongly convex primal subproblem, run to a fixed point."""
    L = np.linalg.eigvalsh(p.A.T @ p.A).max() + gamma
    x = y = x_k.copy()
    t = 1.0
    for _ in range(max_iter):
        g = p.A.T @ (p.A @ y - p.b) - xi + gamma * (y - x_k)
        x_new = soft_threshold(y - g / L, p.lam / L)
        if np.linalg.norm(x_new - x) <= tol * (1 + np.linalg.norm(x)):
            return x_new
        t_new = 0.5 * (1 + math.sqrt(1 + 4 * t * t))
        y = x_new + (t - 1) / t_new * (x_new - x)
        x, t = x_new, t_new
    raise RuntimeError("reference subproblem solve did not converge")


def exact_bpdca(p, x0, max_outer=30000):
    x = x0.copy()
    F = p.objective(x)
    hits, k = 0, 0
    for k in range(max_outer):
        gamma = max(1 / math.sqrt(k + 1), 0.1)
        nrm = np.linalg.norm(x)
        xi = p.lam * x / nrm if nrm else np.zeros_like(x)
        x_new = exact_sub_reg(p, x, xi, gamma)
        F_new = p.objective(x_new)
        rx = np.linalg.norm(x_new - x) / (1 + np.linalg.norm(x_new))
        rf = abs(F_new - F) / (1 + abs(F_new))
        hits = hits + 1 if (max(rx, rf) < 1e-7 or rf < 1e-10) else 0
        x, F = x_new, F_new
        if hits >= 3:
            break
    return x, k + 1


@pytest.fixture(scope="module")
def exact_runs():
    return []


def test_criterion_6_exactness(exact_runs):
    t0 = time.perf_counter()
    slack = 1e-13
    worst, iters = 0.0, []
    for seed in range(10):
        inst = gen_instance(5, 20, 2, 6000 + seed)
        p = l12reg.RegProblem(inst, 0.1)
        x0 = fista_l1ls(p.A, p.b, 0.1)
        params = core.SolverParams(sigma=0.0, slack=slack)
        rep = core.run(p, l12reg.make_subsolver(p, slack=slack), params, x0)
        exact_runs.append((f"sigma0-{seed}", rep, params))
        x_ref, n_ref = exact_bpdca(p, x0)
        worst = max(worst, np.linalg.norm(rep.x_final - x_ref))
        iters.append((rep.outer_iters, n_ref))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and elapsed < 30
    assert record_criterion(
        6, ok, f"max final-iterate distance {worst:.1e} (<= 1e-6) over 10 instances; "
               f"{elapsed:.1f} s (< 30 s)")


# ------------------------------------------------------------ criterion 7

@pytest.fixture(scope="module")
def con_bench_runs():
    t0 = time.perf_counter()
    runs, errors = {}, []
    for seed in FRESH_SEEDS:
        inst = gen_instance(500, 5000, 100, seed)
        for method in ("ibpdca-sc1", "ibpdca-sc2"):
            try:
                runs[(seed, method)] = solve(
                    inst, RunSpec(problem="l12con", method=method, nf=1.1))
            except IBPDCAError as exc:
                errors.append(f"seed {seed} {method}: {exc}")
    return runs, errors, time.perf_counter() - t0


def test_criterion_7_constrained(con_bench_runs):
    runs, errors, elapsed = con_bench_runs
    notes, checks = [], []
    if errors:
        notes.append(f"{len(errors)} failed runs ({errors[0]})")
    viol = max((r.violation for res in runs.values() for r in res.report.trajectory),
               default=math.inf)
    checks.append(viol <= 1e-9)
    notes.append(f"max violation {viol:.1e} (<= 1e-9)")
    rec = max((res.rec for res in runs.values()), default=math.inf)
    checks.append(rec <= 5e-2)
    notes.append(f"max rec {rec:.2e} (<= 5e-2)")
    pairs = [(runs[(s, "ibpdca-sc1")], runs[(s, "ibpdca-sc2")]) for s in FRESH_SEEDS
             if (s, "ibpdca-sc1") in runs and (s, "ibpdca-sc2") in runs]
    agree = max((_rel(a.report.objective, b.report.objective) for a, b in pairs),
                default=math.inf)
    checks.append(agree <= 1e-6)
    notes.append(f"max SC1/SC2 objective gap {agree:.1e} (<= 1e-6)")
    sc2 = [res for (s, m), res in runs.items() if m == "ibpdca-sc2"]
    gated = sum(r.report.cert_constructions < r.report.inner_iters for r in sc2)
    frac = gated / len(FRESH_SEEDS)
    checks.append(frac >= 0.9)
    notes.append(f"SC2 gate saved work on {gated}/{len(FRESH_SEEDS)} runs (>= 90%)")
    checks.append(elapsed < 600)
    notes.append(f"{elapsed:.0f} s (< 600 s)")
    ok = all(checks) and not errors
    assert record_criterion(7, ok, "; ".join(notes))


# ------------------------------------------------------------ criterion 3

def test_criterion_3_descent_invariants(reg_bench_runs, con_bench_runs, audit_runs, exact_runs):
    bench = []
    for key, res in list(reg_bench_runs[0].items()) + list(con_bench_runs[0].items()):
        if res.spec.method == "pdcae":
            continue
        params = core.SolverParams(criterion=res.spec.criterion)
        bench.append((str(key), res.report, params))
    bench += audit_runs + exact_runs
    bad = [(label, v) for label, rep, params in bench
           for v in core.invariant_violations(rep, params, tol=1e-9)]
    failed = len(reg_bench_runs[1]) + len(con_bench_runs[1])
    ok = not bad and failed == 0
    detail = f"{len(bench)} runs checked, {len(bad)} violations"
    if bad:
        detail += f" (first: {bad[0][0]}: {bad[0][1]})"
    if failed:
        detail += f"; {failed} runs failed before producing a trajectory"
    assert record_criterion(3, ok, detail)


def test_criterion_8_timing_not_reproduced():
    # Criterion 8 states what is not asserted; there is nothing to measure.
    record_criterion(8, True, "timing ratios intentionally not asserted; "
                              "iteration-count bands of criteria 5 and 7 stand in")
