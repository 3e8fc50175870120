"""Preconditioned descent with Armijo backtracking on p-normalized fields.

Shared by the local and fractional minimizers. The objective is a
scale-invariant quotient; iterates are rescaled after every accepted step
so that the denominator equals 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable

import numpy as np

from ._jsonio import dumps
from .fields import VectorField, field_to_dict


class MinimizationStall(RuntimeError):
    """No descent step found although the first-order decrease is not at roundoff."""

    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class MinimizeOptions:
    max_iterations: int = 50_000
    quotient_tolerance: float = 1e-12
    quotient_window: int = 10
    gradient_tolerance: float = 1e-8
    armijo: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 60
    restarts: int = 5
    seed: int = 0
    eps_reg: float = 1e-10
    precondition: bool = True

    def __post_init__(self):
        for name in ("quotient_tolerance", "gradient_tolerance", "armijo", "eps_reg"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack must lie in (0, 1)")
        if self.max_iterations < 1 or self.restarts < 1 or self.quotient_window < 1:
            raise ValueError("max_iterations, restarts and quotient_window must be >= 1")

    @classmethod
    def from_mapping(cls, mapping: dict) -> "MinimizeOptions":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in mapping.items():
            if key not in known:
                raise KeyError(f"unknown option {key!r}")
            default = known[key].default
            kwargs[key] = _coerce(raw, type(default), key)
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str | Path) -> "MinimizeOptions":
        return cls.from_mapping(read_config(path))


def _coerce(raw, kind, key):
    if not isinstance(raw, str):
        return kind(raw)
    try:
        if kind is bool:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind is int:
            return int(float(raw)) if "e" in raw.lower() else int(raw)
        return kind(raw)
    except ValueError:
        raise ValueError(f"option {key!r}: cannot parse {raw!r} as {kind.__name__}") from None


def read_config(path: str | Path) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k] = v
    return out


@dataclass(eq=False)
class EigenResult:
    lam: float
    field: VectorField
    p: float
    iterations: int
    final_step: float
    quotient_history: list[float]
    status: str
    restart: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return self.field.N

    def to_dict(self, include_field: bool = True) -> dict:
        d = {
            "lambda": self.lam,
            "N": self.N,
            "p": self.p,
            "grid": self.field.grid.to_dict(),
            "iterations": self.iterations,
            "final_step": self.final_step,
            "status": self.status,
            "restart": self.restart,
            "quotient_history": list(self.quotient_history),
        }
        d.update(self.extra)
        if include_field:
            d["field"] = field_to_dict(self.field)
        return d

    def to_json(self, include_field: bool = True) -> str:
        return dumps(self.to_dict(include_field))

    def history_csv(self) -> str:
        lines = ["# descent history columns: iteration, quotient", "iteration,quotient"]
        lines += [f"{i},{q!r}" for i, q in enumerate(self.quotient_history)]
        return "\n".join(lines) + "\n"


@dataclass
class DescentRun:
    x: np.ndarray
    q: float
    history: list[float]
    iterations: int
    step: float
    status: str


def descend(
    value_and_grad: Callable[[np.ndarray], tuple[float, np.ndarray]],
    value: Callable[[np.ndarray], float],
    normalize: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    opts: MinimizeOptions,
    precondition: Callable[[np.ndarray], np.ndarray] | None = None,
) -> DescentRun:
    """Minimize a scale-invariant quotient q.

    ``value_and_grad(x)`` returns ``(q, grad log q)``. Steps are taken along
    ``-P^{-1} grad log q`` with Armijo backtracking on ``log q`` and the
    iterate is renormalized after each accepted step.
    """
    x = normalize(x0)
    q, g = value_and_grad(x)
    hist = [q]
    alpha = 1.0
    status = "max_iterations"
    it = 0
    w = opts.quotient_window
    for it in range(1, opts.max_iterations + 1):
        if float(np.max(np.abs(g))) <= opts.gradient_tolerance:
            status = "gradient_tolerance"
            it -= 1
            break
        d = -(precondition(g) if precondition is not None else g)
        slope = float(np.sum(g * d))
        if not slope < 0:
            d = -g
            slope = float(np.sum(g * d))
        logq = math.log(q)
        trial = min(2.0 * alpha, 1e6) if it > 1 else 1.0
        accepted = False
        for _ in range(opts.max_backtracks):
            xn = normalize(x + trial * d)
            qn = value(xn)
            if math.isfinite(qn) and qn <= q and math.log(qn) <= logq + opts.armijo * trial * slope:
                accepted = True
                break
            trial *= opts.backtrack
        if not accepted:
            first_order = abs(slope) * min(2.0 * alpha, 1.0)
            if first_order < 1e3 * np.finfo(float).eps:
                status = "roundoff"
                it -= 1
                break
            raise MinimizationStall(
                "no descent step found",
                {"iteration": it, "quotient": q, "slope": slope, "last_step": alpha},
            )
        alpha = trial
        x = xn
        q, g = value_and_grad(x)
        hist.append(q)
        if len(hist) > w and hist[-1 - w] - hist[-1] <= opts.quotient_tolerance * hist[-1]:
            status = "quotient_tolerance"
            break
    return DescentRun(x=x, q=q, history=hist, iterations=it, step=alpha, status=status)


def run_restarts(make_start, run_one, opts: MinimizeOptions) -> tuple[int, DescentRun]:
    """Run every restart and keep the smallest final quotient (lowest index on ties)."""
    best = None
    for r in range(opts.restarts):
        res = run_one(make_start(r))
        if best is None or res.q < best[1].q:
            best = (r, res)
    return best
