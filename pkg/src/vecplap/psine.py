"""The one-dimensional problem: p-sine, vectorial IVP, eigenvalue ladder.

The second-order equation ``-(|u'|^{p-2} u')' = lam |u|^{p-2} u`` is
integrated as the first-order system

    u' = |v|^{q-2} v,    v' = -lam |u|^{p-2} u,    q = p / (p - 1),

with ``v = |u'|^{p-2} u'``, which keeps both right-hand sides continuous
at the degenerate points u = 0 and v = 0.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import optimize

from ._jsonio import dumps
from .kernels import ode
from .vecalg import vector_power


class IntegrationError(RuntimeError):
    def __init__(self, message: str, t_fail: float | None = None):
        super().__init__(message)
        self.t_fail = t_fail


def _check_p(p: float) -> float:
    p = float(p)
    if not p > 1.0 or not math.isfinite(p):
        raise ValueError(f"p must satisfy p > 1, got {p}")
    return p


def conjugate(p: float) -> float:
    return p / (p - 1.0)


def lambda_p_closed(p: float) -> float:
    """First Dirichlet eigenvalue on (0, 1): (2 pi)^p (p - 1) / (p sin(pi/p))^p."""
    p = _check_p(p)
    return (2 * math.pi) ** p * (p - 1) / (p * math.sin(math.pi / p)) ** p


def half_period(p: float) -> float:
    """First positive zero of the p-sine predicted by the closed form."""
    return lambda_p_closed(p) ** (1.0 / p)


def energy(u, v, p: float, lam: float = 1.0):
    """(lam/p)|u|^p + (1/q)|v|^q; conserved along the system.

    Works on single states or on stacked states (last axis = components).
    """
    q = conjugate(p)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu = np.sqrt(np.sum(np.atleast_1d(u) ** 2, axis=-1))
    nv = np.sqrt(np.sum(np.atleast_1d(v) ** 2, axis=-1))
    out = lam * nu**p / p + nv**q / q
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Accepted steps of an integration with cubic Hermite dense output."""

    t: np.ndarray
    u: np.ndarray
    v: np.ndarray
    p: float
    lam: float
    tol: float
    rejected: int = 0
    sign_changes: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    @property
    def N(self) -> int:
        return self.u.shape[1]

    @property
    def t_end(self) -> float:
        return float(self.t[-1])

    def du(self, u=None, v=None):
        v = self.v if v is None else v
        return vector_power(v, conjugate(self.p))

    def dv(self, u=None):
        u = self.u if u is None else u
        return -self.lam * vector_power(u, self.p)

    def energy(self) -> np.ndarray:
        return energy(self.u, self.v, self.p, self.lam)

    def energy_drift(self) -> float:
        e = self.energy()
        return float(np.max(np.abs(e - e[0])))

    def evaluate(self, times) -> tuple[np.ndarray, np.ndarray]:
        """Dense output (u, v) at ``times`` (within [0, t_end])."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        if times.size and (times.min() < self.t[0] - 1e-12 or times.max() > self.t[-1] * (1 + 1e-14)):
            raise ValueError(f"times outside the trajectory [{self.t[0]}, {self.t[-1]}]")
        i = np.clip(np.searchsorted(self.t, times, side="right") - 1, 0, len(self.t) - 2)
        t0, t1 = self.t[i], self.t[i + 1]
        h = (t1 - t0)[:, None]
        th = ((times - t0) / (t1 - t0))[:, None]
        h00 = (1 + 2 * th) * (1 - th) ** 2
        h10 = th * (1 - th) ** 2
        h01 = th**2 * (3 - 2 * th)
        h11 = th**2 * (th - 1)
        du = self.du()
        dv = self.dv()
        u = h00 * self.u[i] + h10 * h * du[i] + h01 * self.u[i + 1] + h11 * h * du[i + 1]
        v = h00 * self.v[i] + h10 * h * dv[i] + h01 * self.v[i + 1] + h11 * h * dv[i + 1]
        return u, v

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n = self.N
        buf.write(f"# trajectory p={self.p!r} lam={self.lam!r} tol={self.tol!r}\n")
        w.writerow(["t"] + [f"u{i + 1}" for i in range(n)] + [f"v{i + 1}" for i in range(n)] + ["energy"])
        for t, u, v, e in zip(self.t, self.u, self.v, self.energy()):
            w.writerow([repr(float(x)) for x in (t, *u, *v, e)])
        return buf.getvalue()


def _default_h0(tol: float) -> float:
    return 0.1 * tol ** 0.2


def integrate_ivp(p: float, lam: float, a, b, t_end: float, tol: float = 1e-10,
                  stop_after: int = 0, max_steps: int = 5_000_000) -> Trajectory:
    """Solve ``-(|u'|^{p-2}u')' = lam |u|^{p-2} u``, ``u(0) = a``, ``u'(0) = b``.

    Adaptive Dormand-Prince 5(4) with absolute local error ``tol`` on the
    (u, v) system. ``stop_after > 0`` ends the integration once ``u[0]``
    has changed sign that many times.
    """
    p = _check_p(p)
    if not lam > 0:
        raise ValueError(f"lam must be positive, got {lam}")
    if not t_end > 0:
        raise ValueError(f"t_end must be positive, got {t_end}")
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("a and b must be vectors of equal length")
    n = a.size
    y0 = np.concatenate([a, vector_power(b, p)])
    if not np.any(y0):
        t = np.array([0.0, float(t_end)])
        z = np.zeros((2, n))
        return Trajectory(t, z, z.copy(), p, float(lam), tol)
    ts, ys, rejected, status = ode.dopri_run(y0, n, p, float(lam), float(t_end), float(tol),
                                             _default_h0(tol), int(stop_after), int(max_steps))
    if status == ode.STATUS_UNDERFLOW:
        raise IntegrationError(f"step size underflow at t = {ts[-1]!r}", float(ts[-1]))
    if status == ode.STATUS_MAX_STEPS:
        raise IntegrationError(f"step limit {max_steps} reached at t = {ts[-1]!r}", float(ts[-1]))
    u = ys[:, :n]
    changes = np.flatnonzero(
        ((u[:-1, 0] > 0) & (u[1:, 0] <= 0)) | ((u[:-1, 0] < 0) & (u[1:, 0] >= 0))
    )
    return Trajectory(ts, u, ys[:, n:], p, float(lam), tol, int(rejected), changes)


def psine(p: float, t_end: float, tol: float = 1e-10, stop_after: int = 0) -> Trajectory:
    """omega with ``-(|w'|^{p-2}w')' = |w|^{p-2}w``, ``w(0) = 0``, ``w'(0) = 1``."""
    return integrate_ivp(p, 1.0, [0.0], [1.0], t_end, tol, stop_after=stop_after)


def _zeros(traj: Trajectory, tol: float) -> list[float]:
    out = []
    for i in traj.sign_changes:
        lo, hi = float(traj.t[i]), float(traj.t[i + 1])
        if traj.u[i + 1, 0] == 0.0:
            out.append(hi)
            continue
        f = lambda s: float(traj.evaluate(s)[0][0, 0])
        out.append(optimize.bisect(f, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps))
    return out


def first_zero(p: float, tol: float = 1e-10) -> float:
    """Smallest T > 0 with omega(T) = 0."""
    return psine_zeros(p, 1, tol)[0]


def psine_zeros(p: float, k_max: int, tol: float = 1e-10) -> list[float]:
    """First ``k_max`` positive zeros of omega from one integration."""
    p = _check_p(p)
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    horizon = 10.0 * k_max * half_period(p)
    traj = psine(p, horizon, tol, stop_after=k_max)
    if len(traj.sign_changes) < k_max:
        raise IntegrationError(
            f"found {len(traj.sign_changes)} of {k_max} zeros before the safety horizon {horizon!r}",
            traj.t_end,
        )
    return _zeros(traj, tol)[:k_max]


@dataclass(frozen=True)
class EigenLadder:
    p: float
    entries: list[tuple[int, float]]

    def closed_form(self) -> list[float]:
        lp = lambda_p_closed(self.p)
        return [k**self.p * lp for k, _ in self.entries]

    def relative_errors(self) -> list[float]:
        return [abs(lam - cf) / cf for (_, lam), cf in zip(self.entries, self.closed_form())]

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "entries": [{"k": k, "lambda": lam} for k, lam in self.entries],
            "closed_form": self.closed_form(),
        }

    def to_json(self) -> str:
        return dumps(self.to_dict())

    def to_csv(self) -> str:
        lines = ["# ladder columns: k, lambda_k (shooting), k^p*lambda_p (closed form), relative error",
                 "k,lambda,closed_form,relative_error"]
        for (k, lam), cf, err in zip(self.entries, self.closed_form(), self.relative_errors()):
            lines.append(f"{k},{lam!r},{cf!r},{err!r}")
        return "\n".join(lines) + "\n"


def shoot_ladder(p: float, k_max: int, tol: float = 1e-10) -> EigenLadder:
    """Dirichlet eigenvalues on (0, 1) as ``T_k^p`` for the zeros ``T_k`` of omega."""
    zeros = psine_zeros(p, k_max, tol)
    return EigenLadder(float(p), [(k + 1, float(T) ** p) for k, T in enumerate(zeros)])


class PSineTable:
    """Lazily extended p-sine trajectory for repeated evaluation.

    Not thread-safe: the table grows in place when queried past its horizon.
    """

    def __init__(self, p: float, tol: float = 1e-11, horizon: float | None = None):
        self.p = _check_p(p)
        self.tol = tol
        self._traj = psine(self.p, horizon or 2.5 * half_period(self.p), tol)

    @property
    def horizon(self) -> float:
        return self._traj.t_end

    def _ensure(self, s_max: float):
        if s_max > self.horizon:
            self._traj = psine(self.p, max(2 * self.horizon, 1.1 * s_max), self.tol)

    def __call__(self, s) -> tuple[np.ndarray, np.ndarray]:
        """(omega(s), omega'(s)); omega is odd, so negative s is allowed."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        a = np.abs(s)
        self._ensure(float(a.max(initial=0.0)))
        u, v = self._traj.evaluate(a)
        sign = np.where(s < 0, -1.0, 1.0)
        return sign * u[:, 0], vector_power(v[:, 0], conjugate(self.p))


@lru_cache(maxsize=64)
def _table(p: float, tol: float) -> PSineTable:
    return PSineTable(p, tol)


def explicit_solution(p: float, lam: float, c, t, tol: float = 1e-11,
                      table: PSineTable | None = None) -> np.ndarray:
    """``u(t) = c / lam^{1/p} * omega(lam^{1/p} t)``; shape ``t.shape + (N,)``."""
    p = _check_p(p)
    if not lam > 0:
        raise ValueError(f"lam must be positive, got {lam}")
    tab = table if table is not None else _table(p, tol)
    c = np.atleast_1d(np.asarray(c, dtype=float))
    t = np.asarray(t, dtype=float)
    r = lam ** (1.0 / p)
    w, _ = tab(r * t.ravel())
    return (w[:, None] * c[None, :] / r).reshape(t.shape + (c.size,))


def implicit_midpoint(p: float, lam: float, a, b, t_end: float, h: float = 1e-3,
                      extrapolate: bool = True) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Fixed-step implicit midpoint solution on the grid ``t_j = j h``.

    With ``extrapolate`` the h and h/2 runs are combined by Richardson
    extrapolation (the rule is symmetric, so the error expands in h^2).
    Returns (t, u, v).
    """
    p = _check_p(p)
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    n = a.size
    y0 = np.concatenate([a, vector_power(b, p)])
    steps = max(1, int(math.ceil(t_end / h)))
    h = t_end / steps
    scale = max(1.0, float(np.max(np.abs(y0))))
    ys = ode.implicit_midpoint_run(y0, n, p, float(lam), h, steps, 200, 1e-15 * scale)
    if extrapolate:
        fine = ode.implicit_midpoint_run(y0, n, p, float(lam), h / 2, 2 * steps, 200, 1e-15 * scale)
        ys = (4 * fine[::2] - ys) / 3
    t = np.linspace(0.0, t_end, steps + 1)
    return t, ys[:, :n], ys[:, n:]


def uniqueness_stress(p: float, lam: float, a, b, t_end: float, tol: float = 1e-11,
                      h: float = 1e-3) -> float:
    """Max discrepancy in (u, v) between the adaptive RK and implicit midpoint solutions."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if not (np.any(a) or np.any(b)):
        raise ValueError("(a, b) must not both vanish")
    traj = integrate_ivp(p, lam, a, b, t_end, tol)
    t, u2, v2 = implicit_midpoint(p, lam, a, b, t_end, h)
    u1, v1 = traj.evaluate(t)
    return float(max(np.max(np.abs(u1 - u2)), np.max(np.abs(v1 - v2))))
