"""Fractional Rayleigh quotient on a 1D grid.

    J_N(u) = int_R int_R |u(x) - u(y)|^p / |x - y|^{1+sp} dx dy / int |u|^p dx

for the piecewise-linear interpolant of nodal values, extended by zero
outside the interval.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.linalg import cho_factor, cho_solve
from scipy.special import roots_jacobi

from ._rng import generator
from .fields import Grid, VectorField, cell_average, cell_average_adjoint, make_grid, p_integral
from .kernels import gagliardo
from .local import initial_field
from .optim import EigenResult, MinimizeOptions, descend, run_restarts

KERNEL_VERSION = 1
DEFAULT_ORDER = 8
FULL_PAIR_LIMIT = 256
SAMPLED_PAIRS = 100_000


@dataclass(frozen=True)
class FracParams:
    s: float
    p: float
    n: int = 1

    def __post_init__(self):
        if not 0 < self.s < 1:
            raise ValueError(f"s must lie in (0, 1), got {self.s}")
        if not self.p > 1:
            raise ValueError(f"p must satisfy p > 1, got {self.p}")
        if self.n != 1:
            raise ValueError("only n = 1 is supported")

    @property
    def kernel_exponent(self) -> float:
        return self.n + self.s * self.p


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    """Quadrature plan for the Gagliardo double integral on a uniform grid.

    ``toeplitz[d]`` holds the element-pair kernel mass
    ``int_e int_f |x - y|^{-(1+sp)}`` for ``|e - f| = d >= 2`` (entries 0
    and 1 are the closed-form coefficients of the same- and adjacent-element
    terms). Pair weights depend only on the element distance, so the full
    symmetric matrix is Toeplitz.
    """

    grid: Grid
    params: FracParams
    order: int
    xi: np.ndarray
    w: np.ndarray
    xj: np.ndarray
    wj: np.ndarray
    toeplitz: np.ndarray

    @property
    def h(self) -> float:
        return self.grid.spacing[0]

    @property
    def length(self) -> float:
        a, b = self.grid.endpoints[0]
        return b - a

    def pair_matrix(self) -> np.ndarray:
        E = self.grid.cell_shape[0]
        idx = np.abs(np.subtract.outer(np.arange(E), np.arange(E)))
        return self.toeplitz[idx]

    def energy_grad(self, values: np.ndarray, want_grad: bool = True, backend=None):
        fn = backend or gagliardo.energy_grad
        U = np.ascontiguousarray(values, dtype=float)
        return fn(U, self.h, self.params.s, self.params.p, self.xi, self.w,
                  self.xj, self.wj, self.length, want_grad)

    def key(self) -> str:
        a, b = self.grid.endpoints[0]
        raw = f"{self.grid.shape[0]}|{a!r}|{b!r}|{self.params.s!r}|{self.params.p!r}|{self.order}"
        return hashlib.sha1(raw.encode()).hexdigest()[:16]

    def save(self, path: str | Path):
        a, b = self.grid.endpoints[0]
        np.savez(
            path, version=KERNEL_VERSION, m=self.grid.shape[0], endpoints=[a, b],
            s=self.params.s, p=self.params.p, order=self.order, xi=self.xi, w=self.w,
            xj=self.xj, wj=self.wj, toeplitz=self.toeplitz,
        )

    @classmethod
    def load(cls, path: str | Path) -> "KernelMatrix":
        with np.load(path) as z:
            if int(z["version"]) != KERNEL_VERSION:
                raise ValueError(f"kernel cache version {int(z['version'])} != {KERNEL_VERSION}")
            grid = make_grid(1, z["endpoints"], int(z["m"]))
            return cls(grid, FracParams(float(z["s"]), float(z["p"])), int(z["order"]),
                       z["xi"], z["w"], z["xj"], z["wj"], z["toeplitz"])


def _pair_masses(E: int, h: float, params: FracParams, xi, w) -> np.ndarray:
    sp = params.s * params.p
    p = params.p
    ex = p - sp + 1
    out = np.empty(E)
    out[0] = 2 * h ** (1 - sp) / ((p - sp) * ex)
    out[1] = 2 * h ** (1 - sp) / ex if E > 1 else 0.0
    for d in range(2, E):
        dist = (d + xi[None, :] - xi[:, None]) * h
        out[d] = h * h * float(np.sum(w[:, None] * w[None, :] * dist ** (-1 - sp)))
    return out


def assemble_kernel(grid: Grid, params: FracParams, order: int = DEFAULT_ORDER) -> KernelMatrix:
    if grid.dim != 1:
        raise ValueError("fractional energies are implemented for 1D grids only")
    t, wt = leggauss(order)
    xi = (t + 1) / 2
    w = wt / 2
    tj, wjr = roots_jacobi(order, 0.0, params.p)
    xj = (tj + 1) / 2
    wj = wjr / 2 ** (params.p + 1)
    E = grid.cell_shape[0]
    return KernelMatrix(grid, params, order, xi, w, xj, wj,
                        _pair_masses(E, grid.spacing[0], params, xi, w))


def load_or_assemble(cache_dir: str | Path, grid: Grid, params: FracParams,
                     order: int = DEFAULT_ORDER) -> KernelMatrix:
    """Kernel from a ``.npz`` sidecar in ``cache_dir``; stale or missing files are regenerated."""
    kern = assemble_kernel(grid, params, order)
    path = Path(cache_dir) / f"kernel-{kern.key()}.npz"
    if path.exists():
        try:
            return KernelMatrix.load(path)
        except (ValueError, KeyError, OSError):
            pass
    path.parent.mkdir(parents=True, exist_ok=True)
    kern.save(path)
    return kern


def _check_grid(u: VectorField, kernel: KernelMatrix):
    if u.grid != kernel.grid:
        raise ValueError("field and kernel live on different grids")


def gagliardo_energy(u: VectorField, kernel: KernelMatrix) -> float:
    _check_grid(u, kernel)
    return float(kernel.energy_grad(u.values, want_grad=False)[0])


def _denominator(x: np.ndarray, grid: Grid, p: float) -> float:
    return p_integral(cell_average(x, grid), p, grid)


def rayleigh_fractional(u: VectorField, kernel: KernelMatrix) -> float:
    _check_grid(u, kernel)
    den = _denominator(u.values, u.grid, kernel.params.p)
    if den == 0.0:
        raise ValueError("quotient undefined for an identically zero field")
    return gagliardo_energy(u, kernel) / den


def _log_grad(x: np.ndarray, kernel: KernelMatrix):
    grid = kernel.grid
    p = kernel.params.p
    num, dnum = kernel.energy_grad(x)
    A = cell_average(x, grid)
    a = np.sqrt(np.sum(A * A, axis=-1))
    den = float(np.sum(a**p)) * grid.cell_volume
    with np.errstate(divide="ignore", invalid="ignore"):
        wgt = np.where(a > 0, a ** (p - 2), 0.0)
    dden = p * grid.cell_volume * cell_average_adjoint(wgt[..., None] * A, grid)
    dden[grid.boundary_mask] = 0.0
    return num / den, dnum / num - dden / den


def fractional_gradient(u: VectorField, kernel: KernelMatrix) -> VectorField:
    """Nodal gradient of ``log rayleigh_fractional``."""
    _check_grid(u, kernel)
    return VectorField(u.grid, _log_grad(u.values, kernel)[1])


def node_pairs(m: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """All node pairs (i < j) for small grids, otherwise seeded random pairs."""
    if m <= FULL_PAIR_LIMIT:
        return np.triu_indices(m, 1)
    rng = generator(seed, 104729)
    i = rng.integers(0, m, SAMPLED_PAIRS)
    j = rng.integers(0, m, SAMPLED_PAIRS)
    return i, j


def cs_contraction(u: VectorField, pairs=None, seed: int = 0) -> float:
    """max over node pairs of ``| |u(x)| - |u(y)| | - |u(x) - u(y)|``; never positive beyond roundoff."""
    X = u.samples()
    i, j = pairs if pairs is not None else node_pairs(X.shape[0], seed)
    nx = np.linalg.norm(X[i], axis=1)
    ny = np.linalg.norm(X[j], axis=1)
    gap = np.abs(nx - ny) - np.linalg.norm(X[i] - X[j], axis=1)
    return float(gap.max()) if gap.size else 0.0


def separable_rank_residual(u: VectorField, pair_samples=None, seed: int = 0) -> float:
    """max over node pairs (x, y) and i < j of |u_i(x) u_j(y) - u_j(x) u_i(y)| at unit max-norm."""
    X = u.samples()
    scale = float(np.max(np.abs(X)))
    if scale == 0.0:
        return 0.0
    X = X / scale
    a, b = pair_samples if pair_samples is not None else node_pairs(X.shape[0], seed)
    worst = 0.0
    for i in range(X.shape[1]):
        for j in range(i + 1, X.shape[1]):
            r = np.abs(X[a, i] * X[b, j] - X[a, j] * X[b, i])
            if r.size:
                worst = max(worst, float(r.max()))
    return worst


def _preconditioner(kernel: KernelMatrix):
    """Inverse of the p = 2 form of matching differential order, on interior nodes."""
    grid = kernel.grid
    m = grid.shape[0]
    s_eq = min(kernel.params.s * kernel.params.p / 2.0, 0.95)
    quad = assemble_kernel(grid, FracParams(s_eq, 2.0), kernel.order)
    S = np.empty((m - 2, m - 2))
    for j in range(1, m - 1):
        e = np.zeros((m, 1))
        e[j, 0] = 1.0
        S[:, j - 1] = 0.5 * quad.energy_grad(e)[1][1:-1, 0]
    S = 0.5 * (S + S.T)
    fac = cho_factor(S)

    def apply(g):
        out = np.zeros_like(g)
        out[1:-1] = cho_solve(fac, g[1:-1])
        return out

    return apply


def minimize_fractional(grid: Grid, N: int, params: FracParams,
                        opts: MinimizeOptions | None = None,
                        kernel: KernelMatrix | None = None) -> EigenResult:
    """Minimize the fractional quotient over N-component fields."""
    if N < 1:
        raise ValueError("N must be >= 1")
    opts = opts or MinimizeOptions()
    kernel = kernel or assemble_kernel(grid, params)
    if kernel.grid != grid or kernel.params != params:
        raise ValueError("kernel does not match grid/params")
    p = params.p
    P = _preconditioner(kernel) if opts.precondition else None

    def normalize(x):
        return x / _denominator(x, grid, p) ** (1.0 / p)

    def value(x):
        return kernel.energy_grad(x, want_grad=False)[0] / _denominator(x, grid, p)

    def run(x0):
        return descend(lambda x: _log_grad(x, kernel), value, normalize, x0, opts, P)

    r, best = run_restarts(lambda r: initial_field(grid, N, r, opts.seed, P), run, opts)
    u = VectorField(grid, best.x)
    return EigenResult(
        lam=rayleigh_fractional(u, kernel), field=u, p=float(p), iterations=best.iterations,
        final_step=best.step, quotient_history=best.history, status=best.status, restart=r,
        extra={"s": params.s},
    )


__all__ = [
    "FracParams", "KernelMatrix", "assemble_kernel", "load_or_assemble", "gagliardo_energy",
    "rayleigh_fractional", "fractional_gradient", "cs_contraction", "separable_rank_residual",
    "minimize_fractional", "node_pairs",
]
