"""Pointwise vector algebra behind the collapse argument.

Lagrange's identity, the modulus field w = |u|, gradient domination
|grad w| <= |Du|, proportionality residuals, rank-one factorization of a
vector field, and the two monotonicity inequalities for a -> |a|^{p-2} a.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .fields import (
    ScalarField,
    VectorField,
    cell_average,
    discrete_gradient,
    field_to_dict,
    gradient_array,
)

RANK_TOL = 1e-13


def lagrange_gap(t, V) -> tuple[float, float]:
    """Both sides of Lagrange's identity for scalars ``t`` and vectors ``V``.

    ``lhs = |sum t_i V_i|^2`` and
    ``rhs = (sum t_i^2)(sum |V_i|^2) - sum_{i<j} |t_i V_j - t_j V_i|^2``.
    """
    t = np.asarray(t, dtype=float).ravel()
    V = np.atleast_2d(np.asarray(V, dtype=float))
    if V.shape[0] != t.size:
        raise ValueError(f"got {t.size} scalars but {V.shape[0]} vectors")
    s = t @ V
    lhs = float(s @ s)
    cross = 0.0
    n = t.size
    for i in range(n):
        for j in range(i + 1, n):
            d = t[i] * V[j] - t[j] * V[i]
            cross += float(d @ d)
    rhs = float(t @ t) * float(np.sum(V * V)) - cross
    return lhs, rhs


def modulus_field(u: VectorField) -> ScalarField:
    return ScalarField(u.grid, np.sqrt(np.sum(u.values**2, axis=-1)))


def gradient_domination(u: VectorField, threshold: float | None = None) -> float:
    """max over cells of ``|grad w| - |Du|`` with ``w = |u|``.

    With ``threshold`` set, only cells whose corner values of w all exceed
    it are considered; returns ``-inf`` when no cell qualifies.
    """
    w = modulus_field(u)
    gw = np.sqrt(np.sum(discrete_gradient(w).values ** 2, axis=(-2, -1)))
    gu = discrete_gradient(u).frobenius()
    viol = gw - gu
    if threshold is not None:
        viol = viol[_corner_min(w.values, u.grid) > threshold]
    return float(viol.max()) if viol.size else -math.inf


def _corner_min(vals: np.ndarray, grid) -> np.ndarray:
    if grid.dim == 1:
        return np.minimum(vals[1:], vals[:-1])
    return np.minimum.reduce([vals[1:, 1:], vals[1:, :-1], vals[:-1, 1:], vals[:-1, :-1]])


@dataclass(frozen=True)
class DecompositionDefect:
    """Cellwise defects of ``w^2|grad w|^2 + sum_{i<j}|u_i grad u_j - u_j grad u_i|^2 = w^2|Du|^2``
    and of ``w grad w = sum_i u_i grad u_i``, measured on qualifying cells."""

    lagrange: float
    w_grad_w: float
    cells: int


def decomposition_defect(u: VectorField, threshold: float = 0.0) -> DecompositionDefect:
    grid = u.grid
    uc = cell_average(u.values, grid)                   # cells, N
    G = gradient_array(u.values, grid)                  # cells, N, dim
    w = np.sqrt(np.sum(u.values**2, axis=-1))
    wc = cell_average(w, grid)
    Gw = gradient_array(w[..., None], grid)[..., 0, :]  # cells, dim
    mask = _corner_min(w, grid) > threshold

    cross = np.zeros(grid.cell_shape)
    N = u.N
    for i in range(N):
        for j in range(i + 1, N):
            d = uc[..., i, None] * G[..., j, :] - uc[..., j, None] * G[..., i, :]
            cross += np.sum(d * d, axis=-1)
    lhs = wc**2 * np.sum(Gw * Gw, axis=-1) + cross
    rhs = wc**2 * np.sum(G * G, axis=(-2, -1))
    wgw = wc[..., None] * Gw - np.einsum("...i,...id->...d", uc, G)
    if not mask.any():
        return DecompositionDefect(0.0, 0.0, 0)
    return DecompositionDefect(
        lagrange=float(np.max(np.abs(lhs - rhs)[mask])),
        w_grad_w=float(np.max(np.sqrt(np.sum(wgw * wgw, axis=-1))[mask])),
        cells=int(mask.sum()),
    )


def proportionality_residual(u: VectorField) -> float:
    """max over cells and i<j of ``|u_i grad u_j - u_j grad u_i|``.

    u is interpolated to cell midpoints so it shares points with the
    gradients. For N = 1 the residual is vacuous; 0 is returned with a
    warning.
    """
    if u.N == 1:
        warnings.warn("proportionality_residual is vacuous for N = 1", stacklevel=2)
        return 0.0
    uc = cell_average(u.values, u.grid)
    G = gradient_array(u.values, u.grid)
    worst = 0.0
    for i in range(u.N):
        for j in range(i + 1, u.N):
            d = uc[..., i, None] * G[..., j, :] - uc[..., j, None] * G[..., i, :]
            worst = max(worst, float(np.sqrt(np.sum(d * d, axis=-1)).max()))
    return worst


@dataclass(frozen=True, eq=False)
class CollapseReport:
    c: np.ndarray
    omega: ScalarField
    residual_ratio: float
    singular_values: tuple[float, float]

    def to_dict(self) -> dict:
        return {
            "c": [float(x) for x in self.c],
            "residual_ratio": float(self.residual_ratio),
            "omega": field_to_dict(self.omega),
        }


def _top_eigvec(G: np.ndarray, max_iter: int = 200, tol: float = 1e-12) -> tuple[float, np.ndarray]:
    """Power iteration on a small symmetric PSD matrix."""
    n = G.shape[0]
    x = np.ones(n) / math.sqrt(n)
    if np.linalg.norm(G @ x) == 0.0:
        # start orthogonal to the range; fall back to the heaviest column
        x = G[:, int(np.argmax(np.diag(G)))].copy()
        nx = np.linalg.norm(x)
        if nx == 0.0:
            return 0.0, np.eye(n)[0]
        x /= nx
    for _ in range(max_iter):
        y = G @ x
        ny = np.linalg.norm(y)
        if ny == 0.0:
            break
        y /= ny
        if y @ x < 0:
            y = -y
        done = np.linalg.norm(y - x) < tol
        x = y
        if done:
            break
    return float(x @ G @ x), x


def _sign_normalize(c: np.ndarray) -> np.ndarray:
    for ci in c:
        if abs(ci) > 1e-12:
            return c if ci > 0 else -c
    return c


def rank_one_factor(u: VectorField) -> CollapseReport:
    """Best rank-one fit ``u ~ c * omega`` of the nodes-by-N sample matrix.

    The top singular direction comes from power iteration on the N-by-N
    Gram matrix; the second singular value from power iteration on the Gram
    matrix of the residual after removing the rank-one part.
    residual_ratio = sigma_2 / sigma_1, with ratios below ``RANK_TOL``
    reported as exactly 0.
    """
    X = u.samples()
    if not np.any(X):
        raise ValueError("cannot factor an identically zero field")
    lam1, c = _top_eigvec(X.T @ X)
    c = _sign_normalize(c / np.linalg.norm(c))
    omega = X @ c
    R = X - np.outer(omega, c)
    lam2, _ = _top_eigvec(R.T @ R)
    s1 = float(np.linalg.norm(omega))
    s2 = math.sqrt(max(lam2, 0.0))
    ratio = min(s2 / s1, 1.0)
    if ratio < RANK_TOL:
        ratio = 0.0
    om = omega.reshape(u.grid.shape)
    om[u.grid.boundary_mask] = 0.0
    return CollapseReport(c=c, omega=ScalarField(u.grid, om), residual_ratio=ratio,
                          singular_values=(s1, s2))


def vector_power(a, p: float) -> np.ndarray:
    """``|a|^{p-2} a`` along the last axis, extended by 0 at a = 0."""
    a = np.asarray(a, dtype=float)
    if a.ndim == 0:
        return np.sign(a) * np.abs(a) ** (p - 1)
    r = np.sqrt(np.sum(a * a, axis=-1, keepdims=True))
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(r > 0, r ** (p - 2), 0.0)
    return scale * a


def tau_integral(a, b, p: float) -> float:
    """``int_0^1 |a + tau (b - a)|^{p-2} dtau`` for ``p > 1``.

    The segment is split at its closest approach to the origin; on each
    half the substitution ``s = (d/L) sinh(theta)`` removes the (integrable)
    singularity when the segment passes through or near 0.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    D = b - a
    L = float(np.linalg.norm(D))
    if L == 0.0:
        r = float(np.linalg.norm(a))
        return r ** (p - 2) if r > 0 else (1.0 if p == 2 else math.inf)
    tstar = -float(a @ D) / float(D @ D)
    d = float(np.linalg.norm(a + tstar * D))
    # a miss distance at rounding level is a crossing; the integral is too
    # sensitive to d (like d^{p-1}) for such a d to carry information
    if d <= 4 * np.finfo(float).eps * max(float(np.linalg.norm(a)), float(np.linalg.norm(b))):
        d = 0.0
    alpha = p - 2.0

    def half(S: float) -> float:
        # int_0^S (d^2 + L^2 s^2)^{alpha/2} ds, S >= 0
        if S <= 0.0:
            return 0.0
        if d == 0.0:
            return L**alpha * S ** (p - 1) / (p - 1)
        top = math.asinh(L * S / d)
        val, _ = integrate.quad(lambda th: math.cosh(th) ** (p - 1), 0.0, top,
                                epsabs=0.0, epsrel=1e-12, limit=200)
        return d ** (p - 1) / L * val

    if tstar <= 0.0:
        return half(1.0 - tstar) - half(-tstar)
    if tstar >= 1.0:
        return half(tstar) - half(tstar - 1.0)
    return half(tstar) + half(1.0 - tstar)


@dataclass(frozen=True)
class MonotonicityCheck:
    upper_ok: bool
    lower_ok: bool
    difference: float
    upper_bound: float
    lower_bound: float


def monotonicity_check(a, b, p: float, rtol: float = 1e-12) -> MonotonicityCheck:
    if not 1.0 < p <= 2.0:
        raise ValueError(f"monotonicity bounds need 1 < p <= 2, got {p}")
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    diff = float(np.linalg.norm(vector_power(a, p) - vector_power(b, p)))
    gap = float(np.linalg.norm(b - a))
    if gap == 0.0:
        return MonotonicityCheck(True, True, diff, 0.0, 0.0)
    upper = (3.0 - p) * gap * tau_integral(a, b, p)
    lower = (p - 1.0) * gap * (1.0 + a @ a + b @ b) ** ((p - 2.0) / 2.0)
    return MonotonicityCheck(
        upper_ok=diff <= upper * (1 + rtol),
        lower_ok=diff >= lower * (1 - rtol),
        difference=diff,
        upper_bound=upper,
        lower_bound=lower,
    )


def monotonicity_bounds(a, b, p: float) -> tuple[bool, bool]:
    chk = monotonicity_check(a, b, p)
    return chk.upper_ok, chk.lower_ok
