import math

import numpy as np
import pytest

from vecplap.optim import MinimizationStall, MinimizeOptions, descend, read_config, run_restarts


def test_options_defaults():
    o = MinimizeOptions()
    assert (o.max_iterations, o.quotient_tolerance, o.quotient_window, o.gradient_tolerance) == (50000, 1e-12, 10, 1e-8)
    assert o.restarts == 5 and o.eps_reg == 1e-10


@pytest.mark.parametrize("kw", [
    {"quotient_tolerance": 0.0},
    {"gradient_tolerance": -1.0},
    {"backtrack": 1.0},
    {"backtrack": 0.0},
    {"restarts": 0},
    {"max_iterations": 0},
])
def test_options_validation(kw):
    with pytest.raises(ValueError):
        MinimizeOptions(**kw)


def test_options_from_mapping_coerces_and_rejects():
    o = MinimizeOptions.from_mapping({"max_iterations": "1e3", "precondition": "off", "armijo": "0.001"})
    assert o.max_iterations == 1000 and o.precondition is False and o.armijo == 1e-3
    with pytest.raises(KeyError, match="bogus"):
        MinimizeOptions.from_mapping({"bogus": "1"})
    with pytest.raises(ValueError, match="restarts"):
        MinimizeOptions.from_mapping({"restarts": "many"})


def test_read_config(tmp_path):
    f = tmp_path / "run.cfg"
    f.write_text("# comment\nrestarts = 2\n\nseed=11  # trailing\n")
    assert read_config(f) == {"restarts": "2", "seed": "11"}
    assert MinimizeOptions.from_file(f).seed == 11
    f.write_text("no equals sign\n")
    with pytest.raises(ValueError):
        read_config(f)


def _rayleigh(A):
    def vg(x):
        q = float(x @ A @ x) / float(x @ x)
        return q, 2 * (A @ x) / float(x @ A @ x) - 2 * x / float(x @ x)
    return vg, lambda x: vg(x)[0], lambda x: x / np.linalg.norm(x)


def test_descend_finds_smallest_eigenvalue():
    rng = np.random.default_rng(0)
    Q, _ = np.linalg.qr(rng.normal(size=(6, 6)))
    A = Q @ np.diag([1.0, 2.0, 3.0, 5.0, 8.0, 13.0]) @ Q.T
    vg, val, norm = _rayleigh(A)
    run = descend(vg, val, norm, rng.normal(size=6), MinimizeOptions())
    assert run.q == pytest.approx(1.0, rel=1e-10)
    assert np.all(np.diff(run.history) <= 0)


def test_descend_stall_raises_with_diagnostics():
    A = np.diag([1.0, 4.0])
    vg, val, norm = _rayleigh(A)
    wrong = lambda x: (vg(x)[0], -vg(x)[1])  # ascent direction: no step can decrease q
    with pytest.raises(MinimizationStall) as exc:
        descend(wrong, val, norm, np.array([1.0, 1.0]), MinimizeOptions(max_backtracks=20))
    assert {"iteration", "quotient", "slope"} <= set(exc.value.diagnostics)


def test_run_restarts_ties_keep_lowest_index():
    class R:
        def __init__(self, q):
            self.q = q
    qs = [3.0, 1.0, 1.0, 2.0]
    r, best = run_restarts(lambda i: i, lambda i: R(qs[i]), MinimizeOptions(restarts=4))
    assert r == 1 and best.q == 1.0


def test_descend_stops_on_gradient():
    A = np.diag([1.0, 3.0])
    vg, val, norm = _rayleigh(A)
    run = descend(vg, val, norm, np.array([1.0, 0.0]), MinimizeOptions())
    assert run.status == "gradient_tolerance" and run.iterations == 0
    assert math.isclose(run.q, 1.0)
