import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vecplap.fields import VectorField, cell_average, make_grid, p_norm_p
from vecplap.local import (
    collapse_pipeline,
    energy_terms,
    minimize_local,
    positivity_defect,
    quotient_gradient,
    rayleigh_local,
    sandwich,
    stiffness_matrix,
    weak_residual,
)
from vecplap.optim import MinimizeOptions
from vecplap.psine import lambda_p_closed
from vecplap.vecalg import decomposition_defect, proportionality_residual, rank_one_factor
from vecplap.verify import random_smooth_field


def sine_field(grid, k=1):
    return VectorField.from_function(grid, lambda x: np.sin(k * np.pi * x))


G401 = make_grid(1, [(0, 1)], 401)
G201 = make_grid(1, [(0, 1)], 201)


# -- quotient --------------------------------------------------------------

def test_quotient_sine():
    assert rayleigh_local(sine_field(G401), 2) == pytest.approx(math.pi**2, rel=1e-3)


@settings(max_examples=30, deadline=None)
@given(t=st.floats(1e-3, 1e3), neg=st.booleans(), p=st.floats(1.1, 5))
def test_quotient_scale_invariant(t, neg, p):
    u = random_smooth_field(make_grid(1, [(0, 1)], 41), 2, 0)
    t = -t if neg else t
    assert rayleigh_local(u.scaled(t), p) == pytest.approx(rayleigh_local(u, p), rel=1e-13)


def test_quotient_zero_component():
    f = sine_field(G201).values
    one = VectorField(G201, f)
    two = VectorField(G201, np.concatenate([f, 0 * f], -1))
    assert rayleigh_local(two, 2.5) == rayleigh_local(one, 2.5)


def test_quotient_zero_field():
    with pytest.raises(ValueError):
        rayleigh_local(VectorField(G201, np.zeros((201, 1))), 2)


def test_quotient_rejects_p():
    with pytest.raises(ValueError):
        rayleigh_local(sine_field(G201), 1.0)


# -- gradient --------------------------------------------------------------

def _fd_check(grid, N, p, seed):
    u = random_smooth_field(grid, N, seed)
    phi = random_smooth_field(grid, N, seed + 1000)
    g = quotient_gradient(u, p).values
    h = 1e-6
    lq = lambda x: math.log(rayleigh_local(VectorField(grid, x), p))
    fd = (lq(u.values + h * phi.values) - lq(u.values - h * phi.values)) / (2 * h)
    an = float(np.sum(g * phi.values))
    return abs(fd - an) / max(abs(fd), 1e-300)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
@pytest.mark.parametrize("N", [1, 3])
@pytest.mark.parametrize("dim", [1, 2])
def test_gradient_finite_differences(p, N, dim):
    grid = make_grid(dim, [(0, 1)] * dim, [41] * dim if dim == 2 else 81)
    for seed in range(3):
        assert _fd_check(grid, N, p, seed) <= 1e-5


def test_gradient_boundary_zero():
    g = quotient_gradient(random_smooth_field(G201, 2, 3), 2.5)
    assert np.all(g.values[G201.boundary_mask] == 0)


def test_gradient_p2_is_discrete_residual():
    u = random_smooth_field(G201, 1, 4)
    x = u.values[:, 0]
    num, den, _, _ = energy_terms(u.values, G201, 2.0)
    q = num / den
    K = stiffness_matrix(G201).toarray()
    inner = ~G201.boundary_mask
    avg = np.zeros((200, 201))
    avg[np.arange(200), np.arange(200)] = 0.5
    avg[np.arange(200), np.arange(1, 201)] = 0.5
    M = G201.cell_volume * (avg.T @ avg)[np.ix_(inner, inner)]
    resid = K @ x[inner] - q * M @ x[inner]
    g = quotient_gradient(u, 2.0).values[inner, 0]
    assert np.allclose(g * num / 2, resid, rtol=1e-10, atol=1e-12 * np.abs(resid).max())


# -- minimizer -------------------------------------------------------------

def _check_result(res, p):
    hist = np.asarray(res.quotient_history)
    assert np.all(np.diff(hist) <= 0)
    assert res.lam == pytest.approx(rayleigh_local(res.field, p), rel=1e-12)
    assert p_norm_p(res.field, p) == pytest.approx(1.0, rel=1e-12)


def test_minimize_1d_p2():
    res = minimize_local(G401, 1, 2.0)
    _check_result(res, 2.0)
    assert abs(res.lam / math.pi**2 - 1) <= 1e-3
    assert np.max(np.abs(quotient_gradient(res.field, 2.0).values)) <= MinimizeOptions().gradient_tolerance


def test_minimize_2d_p2():
    g = make_grid(2, [(0, 1), (0, 1)], [41, 41])
    res = minimize_local(g, 1, 2.0)
    _check_result(res, 2.0)
    assert abs(res.lam / (2 * math.pi**2) - 1) <= 5e-3


def test_minimize_1d_p3_closed_form():
    res = minimize_local(G401, 1, 3.0)
    _check_result(res, 3.0)
    assert abs(res.lam / lambda_p_closed(3) - 1) <= 1e-2


def test_minimize_p3_refinement_approaches_closed_form():
    errs = [abs(minimize_local(make_grid(1, [(0, 1)], m), 1, 3.0).lam / lambda_p_closed(3) - 1)
            for m in (51, 101, 201)]
    assert errs[0] > errs[1] > errs[2]


def test_minimize_p15_sublinear():
    res = minimize_local(G201, 1, 1.5)
    _check_result(res, 1.5)
    assert abs(res.lam / lambda_p_closed(1.5) - 1) <= 1e-2
    assert positivity_defect(res.field) >= -1e-8


def test_minimize_deterministic():
    opts = MinimizeOptions(seed=7, restarts=3)
    a = minimize_local(make_grid(1, [(0, 1)], 61), 2, 2.5, opts)
    b = minimize_local(make_grid(1, [(0, 1)], 61), 2, 2.5, opts)
    assert a.lam == b.lam and np.array_equal(a.field.values, b.field.values)
    assert a.to_json() == b.to_json()


def test_minimize_rejects():
    with pytest.raises(ValueError):
        minimize_local(G201, 0, 2.0)
    with pytest.raises(ValueError):
        minimize_local(G201, 1, 0.5)


def test_eigen_result_json_keys():
    res = minimize_local(make_grid(1, [(0, 1)], 21), 1, 2.0)
    d = res.to_dict()
    for k in ("lambda", "N", "p", "grid", "iterations", "final_step", "status", "field"):
        assert k in d
    assert res.history_csv().splitlines()[0].startswith("#")


# -- weak residual ---------------------------------------------------------

def test_weak_residual_minimizer():
    res = minimize_local(G201, 1, 2.0)
    assert weak_residual(res.field, res.lam, 2.0) <= 1e-6


def test_weak_residual_continuum_eigenpair():
    errs = []
    for m in (101, 201):
        g = make_grid(1, [(0, 1)], m)
        errs.append(weak_residual(sine_field(g), math.pi**2, 2.0))
    assert errs[1] <= errs[0] / 3.0
    assert errs[1] <= 20 * (1 / 200) ** 2


def test_weak_residual_wrong_eigenvalue():
    assert weak_residual(sine_field(G201), 2 * math.pi**2, 2.0) > 1e-2


def test_weak_residual_minimizer_p3():
    res = minimize_local(G201, 2, 3.0)
    assert weak_residual(res.field, res.lam, 3.0) <= 1e-5


# -- collapse and sandwich -------------------------------------------------

def test_collapse_p2_n3():
    res = collapse_pipeline(G201, 3, 2.0)
    assert res.relative_gap() <= 1e-6
    assert res.report.residual_ratio <= 1e-6
    assert res.modulus_mismatch() <= 1e-3


def test_collapse_p3_n2():
    res = collapse_pipeline(G201, 2, 3.0)
    assert res.relative_gap() <= 1e-4
    assert res.report.residual_ratio <= 1e-4
    assert proportionality_residual(res.vector.field) <= 1e-6
    assert res.modulus_mismatch() <= 1e-3


def test_collapse_needs_vector():
    with pytest.raises(ValueError):
        collapse_pipeline(G201, 1, 2.0)


def test_sandwich_on_minimizer():
    p = 2.5
    vec = minimize_local(G201, 2, p)
    sca = minimize_local(G201, 1, p)
    qw, qu = sandwich(vec.field, p)
    tol_disc = decomposition_defect(vec.field, threshold=G201.h).lagrange
    assert sca.lam - tol_disc - 1e-9 <= qw <= qu + 1e-12


def test_sandwich_on_random_fields():
    for seed in range(5):
        u = random_smooth_field(G201, 3, seed)
        qw, qu = sandwich(u, 2.0)
        assert qw <= qu * (1 + 1e-12)


def test_p2_components_proportional():
    res = minimize_local(G201, 3, 2.0, MinimizeOptions(seed=3))
    assert rank_one_factor(res.field).residual_ratio <= 1e-6


def test_positivity_defect_sign_fix():
    f = -sine_field(G201).values
    assert positivity_defect(VectorField(G201, f)) == 0.0
    g = np.sin(2 * np.pi * G201.axes()[0])[:, None]
    g[[0, -1]] = 0
    assert positivity_defect(VectorField(G201, g)) < -0.5


def test_cell_average_is_midpoint():
    u = sine_field(make_grid(1, [(0, 1)], 3))
    assert cell_average(u.values, u.grid)[:, 0].tolist() == [0.5, 0.5]
