"""Executable checks, one per theorem id, each returning a VerifyReport."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ._jsonio import dumps
from ._rng import generator
from .fields import Grid, VectorField, discrete_gradient, make_grid
from .fractional import (
    FracParams,
    assemble_kernel,
    cs_contraction,
    minimize_fractional,
    rayleigh_fractional,
    separable_rank_residual,
)
from .local import collapse_pipeline, minimize_local
from .optim import MinimizeOptions
from .psine import half_period, integrate_ivp, shoot_ladder, uniqueness_stress
from .vecalg import (
    decomposition_defect,
    gradient_domination,
    lagrange_gap,
    modulus_field,
    monotonicity_check,
    proportionality_residual,
    rank_one_factor,
)


@dataclass
class VerifyReport:
    theorem: str
    passed: bool
    measured: dict
    tolerances: dict
    params: dict
    runtime: float = 0.0
    notes: list[str] = field(default_factory=list)

    def to_dict(self, timing: bool = False) -> dict:
        d = {
            "theorem": self.theorem,
            "pass": self.passed,
            "params": self.params,
            "measured": self.measured,
            "tolerances": self.tolerances,
        }
        if self.notes:
            d["notes"] = self.notes
        if timing:
            d["runtime"] = self.runtime
        return d

    def to_json(self, timing: bool = False) -> str:
        return dumps(self.to_dict(timing))


def random_smooth_field(grid: Grid, N: int, seed: int, modes: int = 4) -> VectorField:
    """Random sine series per component; zero on the boundary."""
    rng = generator(seed, 31337)
    axes = [(x - a) / (b - a) for x, (a, b) in zip(grid.axes(), grid.endpoints)]
    vals = np.zeros(grid.shape + (N,))
    for k in range(N):
        coef = rng.normal(size=(modes,) * grid.dim) / (1 + np.arange(modes))
        S = [np.sin(np.pi * np.outer(np.arange(1, modes + 1), t)) for t in axes]
        if grid.dim == 1:
            vals[..., k] = coef @ S[0]
        else:
            vals[..., k] = S[0].T @ coef @ S[1]
    vals[grid.boundary_mask] = 0.0
    return VectorField(grid, vals)


def _grid(dim: int, nodes: int) -> Grid:
    if dim == 1:
        return make_grid(1, [(0.0, 1.0)], nodes)
    return make_grid(2, [(0.0, 1.0), (0.0, 1.0)], [nodes, nodes])


def check_collapse(p=3.0, N=2, nodes=201, dim=1, seed=0, opts=None) -> VerifyReport:
    """Vectorial minimum equals the scalar one and the minimizer is rank one."""
    opts = opts or MinimizeOptions(seed=seed)
    res = collapse_pipeline(_grid(dim, nodes), N, p, opts)
    prop_tol = 1e-4 if dim == 1 else 1e-3
    measured = {
        "lambda_vector": res.vector.lam,
        "lambda_scalar": res.scalar_lambda,
        "relative_gap": res.relative_gap(),
        "residual_ratio": res.report.residual_ratio,
        "proportionality_residual": proportionality_residual(res.vector.field),
        "modulus_mismatch": res.modulus_mismatch(),
    }
    tols = {"relative_gap": 1e-3, "residual_ratio": 1e-4,
            "proportionality_residual": prop_tol, "modulus_mismatch": 1e-3}
    return _report("thm-1.2", measured, tols, {"p": p, "N": N, "nodes": nodes, "dim": dim, "seed": seed})


def check_monotonicity(ps=(1.1, 1.5, 1.9, 2.0), samples=10_000, dim=3, seed=0) -> VerifyReport:
    """Both monotonicity inequalities hold on random pairs of vectors."""
    measured = {}
    for p in ps:
        rng = generator(seed, int(round(p * 1000)))
        fails = 0
        worst_upper = 0.0
        worst_lower = np.inf
        for _ in range(samples):
            a = rng.normal(size=dim) * 10 ** rng.uniform(-2, 2)
            b = rng.normal(size=dim) * 10 ** rng.uniform(-2, 2)
            chk = monotonicity_check(a, b, p)
            fails += (not chk.upper_ok) + (not chk.lower_ok)
            if chk.upper_bound > 0:
                worst_upper = max(worst_upper, chk.difference / chk.upper_bound)
                worst_lower = min(worst_lower, chk.difference / chk.lower_bound)
        measured[f"p={p}"] = {"failures": fails, "max_diff_over_upper": worst_upper,
                              "min_diff_over_lower": worst_lower}
    passed = all(m["failures"] == 0 for m in measured.values())
    return VerifyReport("lemma-3.1-ineq", passed, measured, {"failures": 0},
                        {"p": list(ps), "samples": samples, "dim": dim, "seed": seed})


def random_ivps(count: int, seed: int, p_range=(1.2, 6.0), Ns=(1, 3), zeros: int = 3):
    """Seeded (p, lam, a, b, t_end) tuples whose horizon covers at least ``zeros`` zeros of |u|."""
    rng = generator(seed, 2718)
    out = []
    for i in range(count):
        p = float(rng.uniform(*p_range))
        N = Ns[i % len(Ns)]
        lam = float(rng.uniform(0.5, 5.0))
        a = rng.normal(size=N) if i % 2 else np.zeros(N)
        b = rng.normal(size=N)
        # the system is homogeneous, so zero spacing is half_period / lam^{1/p} at any amplitude
        out.append((p, lam, a, b, (zeros + 0.5) * half_period(p) / lam ** (1 / p)))
    return out


def check_energy(count=20, tol=1e-10, seed=0, stress_tol=1e-11) -> VerifyReport:
    """Conserved energy on random IVPs plus the two-scheme uniqueness witness."""
    drifts = []
    for p, lam, a, b, t_end in random_ivps(count, seed):
        traj = integrate_ivp(p, lam, a, b, t_end, tol)
        drifts.append(traj.energy_drift() / tol)
    stress = {
        "p=1.5": uniqueness_stress(1.5, 1.0, [0.0, 0.0], [1.0, 1.0], 4 * half_period(1.5), stress_tol),
        "p=3": uniqueness_stress(3.0, 1.0, [1.0, 0.0], [0.0, 0.0], 6.0, stress_tol),
    }
    measured = {"max_drift_over_tol": max(drifts), "uniqueness_discrepancy": stress}
    passed = max(drifts) <= 100 and max(stress.values()) <= 1e-5
    return VerifyReport("thm-3.2-energy", passed, measured,
                        {"max_drift_over_tol": 100, "uniqueness_discrepancy": 1e-5},
                        {"count": count, "tol": tol, "seed": seed})


def check_ladder(ps=(1.5, 2.0, 3.0, 4.0), k_max=3, tol=1e-10) -> VerifyReport:
    """Shooting eigenvalues match k^p times the closed form."""
    measured = {}
    for p in ps:
        lad = shoot_ladder(p, k_max, tol)
        measured[f"p={p}"] = {"lambda": [lam for _, lam in lad.entries],
                              "closed_form": lad.closed_form(),
                              "max_relative_error": max(lad.relative_errors())}
    worst = max(m["max_relative_error"] for m in measured.values())
    return VerifyReport("cor-3.3", worst <= 1e-5, measured, {"max_relative_error": 1e-5},
                        {"p": list(ps), "kmax": k_max, "tol": tol})


def _frac_setup(s, p, nodes):
    grid = make_grid(1, [(0.0, 1.0)], nodes)
    params = FracParams(s, p)
    return grid, params, assemble_kernel(grid, params)


def check_frac_n_independence(s=0.5, p=2.0, nodes=101, Ns=(1, 2, 3), seed=0, opts=None) -> VerifyReport:
    """Fractional minima for several N coincide."""
    opts = opts or MinimizeOptions(seed=seed)
    grid, params, kern = _frac_setup(s, p, nodes)
    lams = {f"N={N}": minimize_fractional(grid, N, params, opts, kern).lam for N in Ns}
    vals = np.array(list(lams.values()))
    spread = float((vals.max() - vals.min()) / vals.min())
    return _report("lemma-4.1", {"lambda": lams, "relative_spread": spread},
                   {"relative_spread": 1e-6}, {"s": s, "p": p, "nodes": nodes, "seed": seed})


def check_frac_collapse(s=0.5, p=2.0, nodes=101, N=2, seed=0, opts=None) -> VerifyReport:
    """The N-component fractional minimizer is rank one and its modulus is a scalar minimizer."""
    opts = opts or MinimizeOptions(seed=seed)
    grid, params, kern = _frac_setup(s, p, nodes)
    vec = minimize_fractional(grid, N, params, opts, kern)
    sca = minimize_fractional(grid, 1, params, opts, kern)
    w = modulus_field(vec.field).as_vector()
    measured = {
        "residual_ratio": rank_one_factor(vec.field).residual_ratio,
        "separable_rank_residual": separable_rank_residual(vec.field, seed=seed),
        "modulus_quotient_gap": abs(rayleigh_fractional(w, kern) - sca.lam) / sca.lam,
    }
    tols = {"residual_ratio": 1e-4, "separable_rank_residual": 1e-4, "modulus_quotient_gap": 1e-6}
    return _report("thm-4.2", measured, tols, {"s": s, "p": p, "nodes": nodes, "N": N, "seed": seed})


def check_lagrange(samples=10_000, seed=0) -> VerifyReport:
    """Lagrange's identity on random coefficients and vectors."""
    rng = generator(seed, 61)
    worst = 0.0
    for _ in range(samples):
        N = int(rng.integers(1, 9))
        d = int(rng.integers(1, 5))
        lhs, rhs = lagrange_gap(rng.normal(size=N), rng.normal(size=(N, d)))
        worst = max(worst, abs(lhs - rhs) / (1 + abs(rhs)))
    return _report("eq-2.1", {"max_scaled_gap": worst}, {"max_scaled_gap": 1e-12},
                   {"samples": samples, "seed": seed})


DOMINATION_SLACK = 1e-9
DEFECT_RATIO = 0.6


def check_domination(fields=100, nodes=41, dim=2, N=3, p=2.5, seed=0, opts=None) -> VerifyReport:
    """|grad w| <= |Du| + O(h) on random smooth fields and on a minimizer.

    The O(h) allowance is ``h * max|Du|`` per field. The Lagrange
    decomposition defect is shown to be O(h) by refinement: on the grid with
    half the spacing (same cells, threshold w > h) it must drop by the factor
    ``DEFECT_RATIO`` or more.
    """
    grid = _grid(dim, nodes)
    fine = _grid(dim, 2 * nodes - 1)
    h = grid.h
    worst_viol = -np.inf
    worst_ratio = 0.0
    worst_defect = 0.0
    for i in range(fields):
        u = random_smooth_field(grid, N, seed + i)
        scale = float(np.max(discrete_gradient(u).frobenius()))
        viol = gradient_domination(u, threshold=h)
        if np.isfinite(viol):
            worst_viol = max(worst_viol, (viol - DOMINATION_SLACK) / (h * scale))
        coarse_def = decomposition_defect(u, threshold=h).lagrange
        fine_def = decomposition_defect(random_smooth_field(fine, N, seed + i), threshold=h).lagrange
        worst_defect = max(worst_defect, coarse_def)
        if coarse_def > 1e-12:
            worst_ratio = max(worst_ratio, fine_def / coarse_def)
    opts = opts or MinimizeOptions(seed=seed)
    m = minimize_local(grid, N, p, opts)
    mviol = gradient_domination(m.field, threshold=h)
    mdef = decomposition_defect(m.field, threshold=h)
    measured = {
        "random_max_violation_over_h": worst_viol,
        "random_max_defect": worst_defect,
        "random_max_defect_refinement_ratio": worst_ratio,
        "minimizer_violation": mviol,
        "minimizer_defect": mdef.lagrange,
        "minimizer_w_grad_w_defect": mdef.w_grad_w,
    }
    passed = worst_viol <= 1.0 and worst_ratio <= DEFECT_RATIO and mviol <= DOMINATION_SLACK + h
    return VerifyReport("eq-2.4", bool(passed), measured,
                        {"violation_over_h": 1.0, "defect_refinement_ratio": DEFECT_RATIO,
                         "slack": DOMINATION_SLACK},
                        {"fields": fields, "nodes": nodes, "dim": dim, "N": N, "p": p, "seed": seed})


def check_contraction(fields=20, nodes=101, N=3, s=0.5, p=2.0, seed=0) -> VerifyReport:
    """The modulus map contracts distances, so it does not raise the fractional quotient."""
    grid, params, kern = _frac_setup(s, p, nodes)
    worst = -np.inf
    quotient_excess = -np.inf
    for i in range(fields):
        u = random_smooth_field(grid, N, seed + i)
        worst = max(worst, cs_contraction(u, seed=seed))
        w = modulus_field(u).as_vector()
        qu = rayleigh_fractional(u, kern)
        quotient_excess = max(quotient_excess, (rayleigh_fractional(w, kern) - qu) / qu)
    measured = {"max_contraction_gap": worst, "max_relative_quotient_excess": quotient_excess}
    passed = worst <= 1e-12 and quotient_excess <= 1e-12
    return VerifyReport("eq-4.1", bool(passed), measured,
                        {"max_contraction_gap": 1e-12, "max_relative_quotient_excess": 1e-12},
                        {"fields": fields, "nodes": nodes, "N": N, "s": s, "p": p, "seed": seed})


def _report(theorem, measured, tols, params) -> VerifyReport:
    ok = all(_flat_max(measured[k]) <= v for k, v in tols.items())
    return VerifyReport(theorem, bool(ok), measured, tols, params)


def _flat_max(x):
    if isinstance(x, dict):
        return max(_flat_max(v) for v in x.values())
    return float(x)


CHECKS = {
    "thm-1.2": check_collapse,
    "lemma-3.1-ineq": check_monotonicity,
    "thm-3.2-energy": check_energy,
    "cor-3.3": check_ladder,
    "lemma-4.1": check_frac_n_independence,
    "thm-4.2": check_frac_collapse,
    "eq-2.1": check_lagrange,
    "eq-2.4": check_domination,
    "eq-4.1": check_contraction,
}


def run_check(theorem: str, **params) -> VerifyReport:
    if theorem not in CHECKS:
        raise KeyError(f"unknown theorem id {theorem!r}; choose from {sorted(CHECKS)}")
    t0 = time.perf_counter()
    rep = CHECKS[theorem](**params)
    rep.runtime = time.perf_counter() - t0
    return rep
