"""Discrete local Rayleigh quotient and its minimization.

    I_N(u) = int |Du|^p dx / int |u|^p dx

with |Du| the Frobenius norm of the cell gradient and |u| the Euclidean
norm of the cell-averaged field; both integrals use the midpoint rule.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import factorized

from ._rng import generator
from .fields import (
    Grid,
    VectorField,
    cell_average,
    cell_average_adjoint,
    gradient_adjoint,
    gradient_array,
    p_integral,
)
from .optim import EigenResult, MinimizeOptions, descend, run_restarts
from .vecalg import CollapseReport, modulus_field, rank_one_factor


def _check(p):
    if not p > 1:
        raise ValueError(f"p must satisfy p > 1, got {p}")


def _parts(values: np.ndarray, grid: Grid, p: float):
    G = gradient_array(values, grid)
    A = cell_average(values, grid)
    g2 = np.sum(G * G, axis=(-2, -1))
    a2 = np.sum(A * A, axis=-1)
    vol = grid.cell_volume
    return G, A, g2, a2, float(np.sum(g2 ** (p / 2)) * vol), float(np.sum(a2 ** (p / 2)) * vol)


def _weights(sq: np.ndarray, p: float, eps: float) -> np.ndarray:
    if p >= 2:
        return sq ** ((p - 2) / 2)
    return (sq + eps * eps) ** ((p - 2) / 2)


def energy_terms(values: np.ndarray, grid: Grid, p: float, eps_reg: float = 1e-10):
    """(numerator, denominator, d numerator, d denominator) on raw nodal arrays."""
    G, A, g2, a2, num, den = _parts(values, grid, p)
    vol = grid.cell_volume
    dnum = p * vol * gradient_adjoint(_weights(g2, p, eps_reg)[..., None, None] * G, grid)
    dden = p * vol * cell_average_adjoint(_weights(a2, p, eps_reg)[..., None] * A, grid)
    dnum[grid.boundary_mask] = 0.0
    dden[grid.boundary_mask] = 0.0
    return num, den, dnum, dden


def _quotient_values(values: np.ndarray, grid: Grid, p: float) -> float:
    *_, num, den = _parts(values, grid, p)
    if den == 0.0:
        raise ValueError("quotient undefined for an identically zero field")
    return num / den


def rayleigh_local(u: VectorField, p: float) -> float:
    _check(p)
    return _quotient_values(u.values, u.grid, p)


def _log_grad(values, grid, p, eps_reg):
    num, den, dnum, dden = energy_terms(values, grid, p, eps_reg)
    if den == 0.0:
        raise ValueError("quotient undefined for an identically zero field")
    return num / den, dnum / num - dden / den


def quotient_gradient(u: VectorField, p: float, eps_reg: float = 1e-10) -> VectorField:
    """Nodal gradient of ``log rayleigh_local``; zero on the boundary."""
    _check(p)
    _, g = _log_grad(u.values, u.grid, p, eps_reg)
    return VectorField(u.grid, g)


def _normalizer(grid: Grid, p: float):
    def normalize(x):
        den = p_integral(cell_average(x, grid), p, grid)
        return x / den ** (1.0 / p)
    return normalize


def stiffness_matrix(grid: Grid) -> sp.csc_matrix:
    """Cell-gradient Laplacian stiffness restricted to the interior nodes."""
    def diff_avg(m, h):
        D = sp.diags([-np.ones(m - 1), np.ones(m - 1)], [0, 1], shape=(m - 1, m)) / h
        A = sp.diags([0.5 * np.ones(m - 1), 0.5 * np.ones(m - 1)], [0, 1], shape=(m - 1, m))
        return D.tocsr(), A.tocsr()

    vol = grid.cell_volume
    if grid.dim == 1:
        D, _ = diff_avg(grid.shape[0], grid.spacing[0])
        K = vol * (D.T @ D)
    else:
        Dx, Ax = diff_avg(grid.shape[0], grid.spacing[0])
        Dy, Ay = diff_avg(grid.shape[1], grid.spacing[1])
        Gx = sp.kron(Dx, Ay)
        Gy = sp.kron(Ax, Dy)
        K = vol * (Gx.T @ Gx + Gy.T @ Gy)
    inner = np.flatnonzero(~grid.boundary_mask.ravel())
    return K.tocsr()[inner][:, inner].tocsc()


def _preconditioner(grid: Grid):
    solve = factorized(stiffness_matrix(grid))
    inner = ~grid.boundary_mask

    def apply(g):
        out = np.zeros_like(g)
        gi = g[inner]                       # (interior, N)
        out[inner] = np.column_stack([solve(gi[:, k]) for k in range(g.shape[-1])])
        return out

    return apply


def laplace_ground_state(grid: Grid) -> np.ndarray:
    """Nodal first Dirichlet eigenfunction of the Laplacian on the box."""
    parts = [np.sin(np.pi * (x - a) / (b - a)) for x, (a, b) in zip(grid.axes(), grid.endpoints)]
    f = parts[0] if grid.dim == 1 else np.multiply.outer(parts[0], parts[1])
    f = np.array(f)
    f[grid.boundary_mask] = 0.0
    return f


def initial_field(grid: Grid, N: int, restart: int, seed: int, smooth=None) -> np.ndarray:
    """Restart 0: Laplace ground state times a random unit vector; otherwise smoothed noise."""
    rng = generator(seed, restart)
    if restart == 0:
        c = rng.normal(size=N)
        c /= np.linalg.norm(c)
        return laplace_ground_state(grid)[..., None] * c
    x = rng.normal(size=grid.shape + (N,))
    x[grid.boundary_mask] = 0.0
    if smooth is not None:
        x = smooth(smooth(x))
    x[grid.boundary_mask] = 0.0
    return x


def minimize_local(grid: Grid, N: int, p: float, opts: MinimizeOptions | None = None) -> EigenResult:
    """Minimize the discrete local quotient over N-component fields."""
    _check(p)
    if N < 1:
        raise ValueError("N must be >= 1")
    opts = opts or MinimizeOptions()
    normalize = _normalizer(grid, p)
    P = _preconditioner(grid)

    def run(x0):
        return descend(
            lambda x: _log_grad(x, grid, p, opts.eps_reg),
            lambda x: _quotient_values(x, grid, p),
            normalize,
            x0,
            opts,
            P if opts.precondition else None,
        )

    r, best = run_restarts(lambda r: initial_field(grid, N, r, opts.seed, P), run, opts)
    u = VectorField(grid, best.x)
    return EigenResult(
        lam=rayleigh_local(u, p), field=u, p=float(p), iterations=best.iterations,
        final_step=best.step, quotient_history=best.history, status=best.status, restart=r,
    )


def bump_test_fields(grid: Grid, N: int, count: int, seed: int) -> list[np.ndarray]:
    """Random smooth compactly supported test fields, unit max-norm, zero on the boundary."""
    rng = generator(seed, 7919)
    X = np.meshgrid(*grid.axes(), indexing="ij")
    out = []
    for _ in range(count):
        r2 = np.zeros(grid.shape)
        for axis, (a, b) in enumerate(grid.endpoints):
            L = b - a
            width = rng.uniform(0.15, 0.45) * L
            centre = rng.uniform(a + width, b - width)
            r2 = r2 + ((X[axis] - centre) / width) ** 2
        with np.errstate(divide="ignore", over="ignore"):
            bump = np.where(r2 < 1, np.exp(-1.0 / np.maximum(1 - r2, 1e-300)), 0.0)
        c = rng.normal(size=N)
        phi = bump[..., None] * (c / np.linalg.norm(c))
        phi[grid.boundary_mask] = 0.0
        m = np.max(np.abs(phi))
        if m > 0:
            out.append(phi / m)
    return out


def weak_residual(u: VectorField, lam: float, p: float, test_count: int = 64, seed: int = 0) -> float:
    """max over bump tests phi of |int |Du|^{p-2} Du : Dphi - lam int |u|^{p-2} u . phi|.

    u is first rescaled to unit p-norm.
    """
    _check(p)
    grid = u.grid
    x = _normalizer(grid, p)(u.values)
    num, den, dnum, dden = energy_terms(x, grid, p, eps_reg=0.0 if p >= 2 else 1e-300)
    # dnum / p and dden / p are the discrete weak-form actions on nodal test vectors
    action = (dnum - lam * dden) / p
    return max(abs(float(np.sum(action * phi))) for phi in bump_test_fields(grid, u.N, test_count, seed))


class CollapseResult(NamedTuple):
    vector: EigenResult
    report: CollapseReport
    scalar_lambda: float
    scalar: EigenResult

    def relative_gap(self) -> float:
        return abs(self.vector.lam - self.scalar_lambda) / self.scalar_lambda

    def modulus_mismatch(self) -> float:
        """p-integral distance between |u_N| and the scalar minimizer, both unit-normalized."""
        return modulus_mismatch(self.vector.field, self.scalar.field, self.vector.p)


def modulus_mismatch(u: VectorField, scalar: VectorField, p: float) -> float:
    grid = u.grid
    norm = _normalizer(grid, p)
    w = norm(modulus_field(u).values[..., None])
    s = scalar.values
    s = norm(s if np.sum(s) >= 0 else -s)
    return p_integral(cell_average(w - s, grid), p, grid) ** (1.0 / p)


def collapse_pipeline(grid: Grid, N: int, p: float, opts: MinimizeOptions | None = None) -> CollapseResult:
    """Minimize at N and at N = 1 on the same grid and factor the vectorial minimizer."""
    if N < 2:
        raise ValueError("collapse_pipeline needs N >= 2")
    vec = minimize_local(grid, N, p, opts)
    sca = minimize_local(grid, 1, p, opts)
    return CollapseResult(vec, rank_one_factor(vec.field), sca.lam, sca)


def sandwich(u: VectorField, p: float) -> tuple[float, float]:
    """(quotient of |u|, quotient of u)."""
    w = modulus_field(u).as_vector()
    return rayleigh_local(w, p), rayleigh_local(u, p)


def positivity_defect(u: VectorField) -> float:
    """Most negative interior value of a scalar field after fixing its sign by total integral."""
    vals = u.values[..., 0]
    if np.sum(vals) < 0:
        vals = -vals
    interior = vals[~u.grid.boundary_mask]
    return float(min(interior.min(), 0.0)) if interior.size else 0.0


__all__ = [
    "rayleigh_local", "quotient_gradient", "minimize_local", "weak_residual",
    "collapse_pipeline", "CollapseResult", "stiffness_matrix", "energy_terms",
    "laplace_ground_state", "sandwich", "positivity_defect", "modulus_mismatch",
]

