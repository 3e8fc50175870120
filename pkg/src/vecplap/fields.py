"""Grids, nodal fields, cell gradients and p-power quadrature.

Fields live at grid nodes and vanish on the boundary. Everything that is
integrated (gradients, interpolated values) lives at cell midpoints in 1D
and cell centres in 2D, so the two integrands of a Rayleigh quotient are
collocated.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid on an interval or an axis-aligned rectangle."""

    dim: int
    endpoints: tuple[tuple[float, float], ...]
    node_counts: tuple[int, ...]

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if len(self.endpoints) != self.dim or len(self.node_counts) != self.dim:
            raise ValueError("need one (a, b) pair and one node count per axis")
        for (a, b), m in zip(self.endpoints, self.node_counts):
            if not (np.isfinite(a) and np.isfinite(b)) or not a < b:
                raise ValueError(f"degenerate interval [{a}, {b}]")
            if int(m) != m or m < 3:
                raise ValueError(f"node_count must be an integer >= 3, got {m}")

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(int(m) for m in self.node_counts)

    @property
    def cell_shape(self) -> tuple[int, ...]:
        return tuple(int(m) - 1 for m in self.node_counts)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((b - a) / (m - 1) for (a, b), m in zip(self.endpoints, self.node_counts))

    @property
    def h(self) -> float:
        """Largest spacing over the axes."""
        return max(self.spacing)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(a, b, m) for (a, b), m in zip(self.endpoints, self.shape)]

    def cell_axes(self) -> list[np.ndarray]:
        return [0.5 * (x[1:] + x[:-1]) for x in self.axes()]

    def coordinates(self) -> np.ndarray:
        """Node coordinates, shape ``shape + (dim,)``."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def cell_centers(self) -> np.ndarray:
        return np.stack(np.meshgrid(*self.cell_axes(), indexing="ij"), axis=-1)

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for axis in range(self.dim):
            idx = [slice(None)] * self.dim
            idx[axis] = 0
            mask[tuple(idx)] = True
            idx[axis] = -1
            mask[tuple(idx)] = True
        mask.setflags(write=False)
        return mask

    def boundary_nodes(self) -> np.ndarray:
        """Flat (row-major) indices of the boundary nodes."""
        return np.flatnonzero(self.boundary_mask)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "endpoints": [list(map(float, e)) for e in self.endpoints],
            "node_counts": list(self.shape),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Grid":
        return make_grid(d["dim"], d["endpoints"], d["node_counts"])


def make_grid(dim: int, endpoints, node_counts) -> Grid:
    """Build a grid; ``endpoints`` is ``[a, b]`` in 1D or one pair per axis."""
    ends = np.asarray(endpoints, dtype=float)
    if ends.ndim == 1:
        ends = ends.reshape(1, 2) if ends.size == 2 else ends
    if ends.shape != (dim, 2):
        raise ValueError(f"endpoints must have shape ({dim}, 2), got {ends.shape}")
    counts = np.atleast_1d(node_counts)
    if counts.size == 1 and dim > 1:
        counts = np.repeat(counts, dim)
    return Grid(
        dim=int(dim),
        endpoints=tuple((float(a), float(b)) for a, b in ends),
        node_counts=tuple(int(m) if int(m) == m else m for m in counts),
    )


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.shape != self.grid.shape:
            raise ValueError(f"values shape {vals.shape} does not match grid {self.grid.shape}")
        if np.any(vals[self.grid.boundary_mask] != 0.0):
            raise ValueError("scalar field must vanish on the boundary")
        object.__setattr__(self, "values", vals)

    def as_vector(self) -> "VectorField":
        return VectorField(self.grid, self.values[..., None])


@dataclass(frozen=True, eq=False)
class VectorField:
    """N components per node; ``values`` has shape ``grid.shape + (N,)``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.shape[:-1] != self.grid.shape or vals.ndim != self.grid.dim + 1:
            raise ValueError(
                f"values shape {vals.shape} does not match grid {self.grid.shape} + (N,)"
            )
        if vals.shape[-1] < 1:
            raise ValueError("N must be >= 1")
        if np.any(vals[self.grid.boundary_mask] != 0.0):
            raise ValueError("vector field must vanish on the boundary")
        object.__setattr__(self, "values", vals)

    @property
    def N(self) -> int:
        return self.values.shape[-1]

    def component(self, i: int) -> ScalarField:
        return ScalarField(self.grid, self.values[..., i])

    def scaled(self, t: float) -> "VectorField":
        return VectorField(self.grid, t * self.values)

    def samples(self) -> np.ndarray:
        """Node samples as a ``(nodes, N)`` matrix, row-major node order."""
        return self.values.reshape(-1, self.N)

    @classmethod
    def from_function(cls, grid: Grid, func, N: int | None = None) -> "VectorField":
        """Sample ``func(*coords)`` at the nodes and zero the boundary.

        ``func`` returns an array broadcastable to ``grid.shape`` (scalar
        field, promoted to N=1) or an array with a trailing component axis.
        """
        vals = np.asarray(func(*np.meshgrid(*grid.axes(), indexing="ij")), dtype=float)
        if vals.shape == grid.shape:
            vals = vals[..., None]
        elif vals.ndim == grid.dim + 1 and vals.shape[0] != grid.shape[0]:
            vals = np.moveaxis(vals, 0, -1)
        if N is not None and vals.shape[-1] != N:
            raise ValueError(f"function produced {vals.shape[-1]} components, expected {N}")
        vals = np.array(vals)
        vals[grid.boundary_mask] = 0.0
        return cls(grid, vals)

    @classmethod
    def from_components(cls, components: Sequence[ScalarField | np.ndarray]) -> "VectorField":
        grid = next(c.grid for c in components if isinstance(c, ScalarField))
        arrs = [c.values if isinstance(c, ScalarField) else np.asarray(c) for c in components]
        return cls(grid, np.stack(arrs, axis=-1))


@dataclass(frozen=True, eq=False)
class GradientSample:
    """Cell gradients, shape ``grid.cell_shape + (N, dim)``."""

    grid: Grid
    values: np.ndarray

    def frobenius(self) -> np.ndarray:
        """|Du| per cell."""
        return np.sqrt(np.sum(self.values**2, axis=(-2, -1)))


# -- linear cell operators on raw nodal arrays (trailing component axis) --


def cell_average(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Average of the corner node values of every cell."""
    if grid.dim == 1:
        return 0.5 * (values[1:] + values[:-1])
    return 0.25 * (values[1:, 1:] + values[1:, :-1] + values[:-1, 1:] + values[:-1, :-1])


def cell_average_adjoint(cell_values: np.ndarray, grid: Grid) -> np.ndarray:
    """Transpose of :func:`cell_average`."""
    out = np.zeros(grid.shape + cell_values.shape[grid.dim:])
    if grid.dim == 1:
        out[1:] += 0.5 * cell_values
        out[:-1] += 0.5 * cell_values
    else:
        q = 0.25 * cell_values
        out[1:, 1:] += q
        out[1:, :-1] += q
        out[:-1, 1:] += q
        out[:-1, :-1] += q
    return out


def gradient_array(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Cell gradients of nodal ``values`` (shape ``grid.shape + (N,)``).

    Returns shape ``grid.cell_shape + (N, dim)``. In 1D the forward
    difference; in 2D each partial derivative is the mean of the two
    parallel edge differences of the cell.
    """
    hs = grid.spacing
    if grid.dim == 1:
        return ((values[1:] - values[:-1]) / hs[0])[..., None]
    dx = (values[1:, 1:] - values[:-1, 1:] + values[1:, :-1] - values[:-1, :-1]) / (2 * hs[0])
    dy = (values[1:, 1:] - values[1:, :-1] + values[:-1, 1:] - values[:-1, :-1]) / (2 * hs[1])
    return np.stack([dx, dy], axis=-1)


def gradient_adjoint(G: np.ndarray, grid: Grid) -> np.ndarray:
    """Transpose of :func:`gradient_array`."""
    hs = grid.spacing
    out = np.zeros(grid.shape + G.shape[grid.dim:-1])
    if grid.dim == 1:
        g = G[..., 0] / hs[0]
        out[1:] += g
        out[:-1] -= g
        return out
    gx = G[..., 0] / (2 * hs[0])
    gy = G[..., 1] / (2 * hs[1])
    out[1:, 1:] += gx + gy
    out[:-1, 1:] += -gx + gy
    out[1:, :-1] += gx - gy
    out[:-1, :-1] += -gx - gy
    return out


def discrete_gradient(u: VectorField | ScalarField) -> GradientSample:
    vals = u.values if isinstance(u, VectorField) else u.values[..., None]
    return GradientSample(u.grid, gradient_array(vals, u.grid))


def p_integral(values_per_cell, p: float, grid: Grid) -> float:
    """Midpoint rule for the integral of ``|value|^p`` over the cells.

    ``values_per_cell`` has shape ``grid.cell_shape``, or carries extra
    trailing axes, in which case the Euclidean norm over them is taken.
    """
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")
    v = np.asarray(values_per_cell, dtype=float)
    if v.shape[: grid.dim] != grid.cell_shape:
        raise ValueError(f"expected cell shape {grid.cell_shape}, got {v.shape}")
    if v.ndim > grid.dim:
        v = v.reshape(grid.cell_shape + (-1,))
        mag = np.sqrt(np.sum(v * v, axis=-1))
    else:
        mag = np.abs(v)
    return float(np.sum(mag**p) * grid.cell_volume)


def p_norm_p(u: VectorField, p: float) -> float:
    """p_integral of the midpoint-interpolated |u|."""
    return p_integral(cell_average(u.values, u.grid), p, u.grid)


# -- serialization ---------------------------------------------------------


def field_to_dict(u: VectorField | ScalarField) -> dict:
    vec = u if isinstance(u, VectorField) else u.as_vector()
    return {"grid": vec.grid.to_dict(), "N": vec.N, "values": vec.values.tolist()}


def field_from_dict(d: dict) -> VectorField:
    grid = Grid.from_dict(d["grid"])
    vals = np.asarray(d["values"], dtype=float).reshape(grid.shape + (int(d["N"]),))
    return VectorField(grid, vals)


def field_to_json(u: VectorField | ScalarField) -> str:
    return json.dumps(field_to_dict(u))


def field_from_json(text: str) -> VectorField:
    return field_from_dict(json.loads(text))


def field_to_csv(u: VectorField | ScalarField) -> str:
    vec = u if isinstance(u, VectorField) else u.as_vector()
    coords = vec.grid.coordinates().reshape(-1, vec.grid.dim)
    names = ["x", "y"][: vec.grid.dim] + [f"u{i + 1}" for i in range(vec.N)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for xyz, row in zip(coords, vec.samples()):
        w.writerow([repr(float(c)) for c in xyz] + [repr(float(c)) for c in row])
    return buf.getvalue()


def field_from_csv(text: str, grid: Grid) -> VectorField:
    rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].startswith("#")]
    data = np.asarray(rows[1:], dtype=float)
    if data.shape[0] != grid.size:
        raise ValueError(f"expected {grid.size} rows, got {data.shape[0]}")
    return VectorField(grid, data[:, grid.dim:].reshape(grid.shape + (-1,)))
