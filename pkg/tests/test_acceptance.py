"""Acceptance criteria 1-10, one test each.

Every test prints a ``criterion N: PASS`` or ``criterion N: FAIL`` line
(visible without ``-s``) before asserting. Run with

    pytest tests/test_acceptance.py -v
"""

import math
import os
import time
import warnings

import numpy as np
import pytest
from scipy.integrate import IntegrationWarning

from oracles import GAGLIARDO_FROZEN, U7, gagliardo_bruteforce
from vecplap.fields import VectorField, make_grid
from vecplap.fractional import (
    FracParams,
    assemble_kernel,
    fractional_gradient,
    gagliardo_energy,
    minimize_fractional,
    rayleigh_fractional,
    separable_rank_residual,
)
from vecplap.local import minimize_local, quotient_gradient, rayleigh_local
from vecplap.psine import explicit_solution, first_zero, integrate_ivp
from vecplap.vecalg import rank_one_factor
from vecplap.verify import (
    check_collapse,
    check_domination,
    check_energy,
    check_ladder,
    check_lagrange,
    check_monotonicity,
    random_smooth_field,
)


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail
    return emit


def test_criterion_1_closed_form_ladder(report):
    # one-time JIT compilation (cached on disk afterwards) is not part of the timed run
    t0 = time.perf_counter()
    check_ladder(ps=(2.0,), k_max=1, tol=1e-6)
    warm = time.perf_counter() - t0
    t0 = time.perf_counter()
    rep = check_ladder(ps=(1.5, 2.0, 3.0, 4.0), k_max=3, tol=1e-10)
    dt = time.perf_counter() - t0
    worst = max(m["max_relative_error"] for m in rep.measured.values())
    report(1, rep.passed and worst <= 1e-5 and dt < 10,
           f"max rel error {worst:.2e} (<= 1e-5), {dt:.2f} s (< 10 s; warm-up {warm:.1f} s)")


def test_criterion_2_p2_anchors(report):
    t0 = time.perf_counter()
    z = first_zero(2.0, 1e-10)
    lam1 = minimize_local(make_grid(1, [(0, 1)], 401), 1, 2.0).lam
    lam2 = minimize_local(make_grid(2, [(0, 1), (0, 1)], [41, 41]), 1, 2.0).lam
    dt = time.perf_counter() - t0
    e0 = abs(z - math.pi)
    e1 = abs(lam1 / math.pi**2 - 1)
    e2 = abs(lam2 / (2 * math.pi**2) - 1)
    ok = e0 <= 1e-8 and e1 <= 1e-3 and e2 <= 5e-3 and dt < 60
    report(2, ok, f"|zero - pi| {e0:.1e}, 1D rel {e1:.2e}, 2D rel {e2:.2e}, {dt:.1f} s")


def test_criterion_3_energy_invariant(report):
    rep = check_energy(count=20, tol=1e-10)
    d = rep.measured["max_drift_over_tol"]
    report(3, d <= 100, f"max drift {d:.1f} * tol (<= 100 * tol) on 20 IVPs")


def test_criterion_4_scaling_law(report):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for i in range(10):
        p = float(rng.uniform(1.3, 5.0))
        lam = float(rng.uniform(0.5, 10.0))
        c = rng.normal(size=1 + i % 3)
        t_end = 3 * first_zero(p) / lam ** (1 / p)
        t = np.linspace(0, t_end, 301)
        u, _ = integrate_ivp(p, lam, np.zeros(c.size), c, t_end, tol=1e-9).evaluate(t)
        worst = max(worst, float(np.max(np.abs(u - explicit_solution(p, lam, c, t)))))
    report(4, worst <= 1e-6, f"max pointwise error {worst:.2e} (<= 1e-6) on 10 instances")


def test_criterion_5_uniqueness(report):
    rep = check_energy(count=1, tol=1e-10)
    st = rep.measured["uniqueness_discrepancy"]
    ok = max(st.values()) <= 1e-5
    report(5, ok, f"p=1.5 (u through 0) {st['p=1.5']:.2e}, p=3 (v through 0) {st['p=3']:.2e} (<= 1e-5)")


def test_criterion_6_collapse(report):
    t0 = time.perf_counter()
    cases = [(2.0, 3, 1, 201), (3.0, 2, 1, 201), (2.5, 2, 1, 201), (2.5, 2, 2, 31)]
    lines, ok = [], True
    for p, N, dim, nodes in cases:
        rep = check_collapse(p=p, N=N, nodes=nodes, dim=dim)
        m = rep.measured
        prop_tol = 1e-4 if dim == 1 else 1e-3
        good = (m["relative_gap"] <= 1e-3 and m["residual_ratio"] <= 1e-4
                and m["proportionality_residual"] <= prop_tol)
        ok &= good
        lines.append(f"(p={p}, N={N}, {dim}D) gap {m['relative_gap']:.1e} rr {m['residual_ratio']:.1e} "
                     f"prop {m['proportionality_residual']:.1e}")
    dt = time.perf_counter() - t0
    report(6, ok and dt < 300, "; ".join(lines) + f"; {dt:.1f} s")


def test_criterion_7_inequality_suite(report):
    lag = check_lagrange(samples=10_000)
    dom = check_domination(fields=100)
    m = dom.measured
    gap = lag.measured["max_scaled_gap"]
    ok = lag.passed and gap <= 1e-12 and dom.passed
    report(7, ok, f"Lagrange gap {gap:.1e}; domination violation/(h max|Du|) "
                  f"{m['random_max_violation_over_h']:.2f}; minimizer violation {m['minimizer_violation']:.1e}; "
                  f"defect {m['random_max_defect']:.1e} with refinement ratio "
                  f"{m['random_max_defect_refinement_ratio']:.2f}")


def test_criterion_8_monotonicity(report):
    rep = check_monotonicity(ps=(1.1, 1.5, 1.9, 2.0), samples=10_000)
    fails = sum(v["failures"] for v in rep.measured.values())
    report(8, fails == 0, f"{fails} failures on 4 x 10^4 samples")


@pytest.mark.slow
def test_criterion_9_fractional_suite(report):
    t0 = time.perf_counter()
    # 9 (s, p) pairs on a 6-element grid; frozen brute-force references
    # (recomputed with VECPLAP_LIVE_ORACLE=1; oracle time is not counted)
    u7 = VectorField(make_grid(1, [(0, 1)], len(U7)), np.array(U7)[:, None])
    worst_oracle = 0.0
    combos = [(s, p, ref) for U, s, p, ref in GAGLIARDO_FROZEN if U is U7]
    assert len(combos) == 9
    live = os.environ.get("VECPLAP_LIVE_ORACLE") == "1"
    oracle_time = 0.0
    for s, p, ref in combos:
        if live:
            t1 = time.perf_counter()
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", IntegrationWarning)
                ref = gagliardo_bruteforce(np.linspace(0, 1, len(U7)), U7, s, p)
            oracle_time += time.perf_counter() - t1
        val = gagliardo_energy(u7, assemble_kernel(u7.grid, FracParams(s, p)))
        worst_oracle = max(worst_oracle, abs(val - ref) / ref)
    grid = make_grid(1, [(0, 1)], 101)
    spreads, rrs, seps = [], [], []
    for s, p in [(0.5, 2.0), (0.4, 3.0)]:
        params = FracParams(s, p)
        kern = assemble_kernel(grid, params)
        res = {N: minimize_fractional(grid, N, params, kernel=kern) for N in (1, 2, 3)}
        lams = np.array([r.lam for r in res.values()])
        spreads.append(float((lams.max() - lams.min()) / lams.min()))
        rrs.append(rank_one_factor(res[2].field).residual_ratio)
        seps.append(separable_rank_residual(res[2].field))
    dt = time.perf_counter() - t0 - oracle_time
    ok = (worst_oracle <= 1e-4 and max(spreads) <= 1e-6 and max(rrs) <= 1e-4
          and max(seps) <= 1e-4 and dt < 300)
    report(9, ok, f"oracle rel {worst_oracle:.1e}; N-spread {max(spreads):.1e}; "
                  f"residual_ratio {max(rrs):.1e}; separable {max(seps):.1e}; {dt:.1f} s")


def _fd_gap(q, grad, u, phi, h=1e-6):
    g = grad(u).values
    lq = lambda x: math.log(q(VectorField(u.grid, x)))
    fd = (lq(u.values + h * phi.values) - lq(u.values - h * phi.values)) / (2 * h)
    return abs(fd - float(np.sum(g * phi.values))) / abs(fd)


def test_criterion_10_gradients(report):
    worst_local, worst_frac = 0.0, 0.0
    g1 = make_grid(1, [(0, 1)], 81)
    g2 = make_grid(2, [(0, 1), (0, 1)], [21, 21])
    gf = make_grid(1, [(0, 1)], 41)
    for p in (1.5, 2.0, 3.0):
        for grid in (g1, g2):
            for seed in range(2):
                u, phi = random_smooth_field(grid, 2, seed), random_smooth_field(grid, 2, seed + 99)
                worst_local = max(worst_local, _fd_gap(lambda v: rayleigh_local(v, p),
                                                       lambda v: quotient_gradient(v, p), u, phi))
        kern = assemble_kernel(gf, FracParams(0.5, p))
        for seed in range(2):
            u, phi = random_smooth_field(gf, 2, seed), random_smooth_field(gf, 2, seed + 99)
            worst_frac = max(worst_frac, _fd_gap(lambda v: rayleigh_fractional(v, kern),
                                                 lambda v: fractional_gradient(v, kern), u, phi))
    report(10, max(worst_local, worst_frac) <= 1e-5,
           f"local {worst_local:.1e}, fractional {worst_frac:.1e} (<= 1e-5)")
