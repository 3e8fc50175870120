"""Command-line front end: ``vecplap <command> [flags]``.

Exit status: 0 success, 1 contract or verification failure, 2 usage error,
3 IO error. Results go to ``--output``, else to ``$VECPLAP_OUTPUT_DIR``,
else to stdout.
"""

from __future__ import annotations

import argparse
import inspect
import json
import os
import sys
from dataclasses import fields as dc_fields
from pathlib import Path

import numpy as np

from ._jsonio import dumps
from .fields import field_from_dict, field_to_csv, make_grid
from .fractional import FracParams, assemble_kernel, load_or_assemble, minimize_fractional
from .local import minimize_local
from .optim import MinimizationStall, MinimizeOptions, read_config
from .psine import IntegrationError, Trajectory, first_zero, half_period, psine, shoot_ladder
from .verify import CHECKS, run_check

OUTPUT_ENV = "VECPLAP_OUTPUT_DIR"
EXPORT_KINDS = ("trajectory", "eigenfunction", "history", "ladder")
OPTION_KEYS = {f.name for f in dc_fields(MinimizeOptions)}


class UsageError(ValueError):
    pass


# -- parameter handling ----------------------------------------------------


def parse_nodes(text) -> list[int]:
    parts = str(text).lower().replace("×", "x").split("x")
    try:
        return [int(s) for s in parts]
    except ValueError:
        raise UsageError(f"nodes: expected an integer or AxB, got {text!r}") from None


def _coerce(key, raw, kind):
    if raw is None or not isinstance(raw, str):
        return raw
    try:
        return kind(raw)
    except ValueError:
        raise UsageError(f"{key}: cannot parse {raw!r} as {kind.__name__}") from None


def merged_params(args, keys: dict[str, type], allow_options: bool) -> tuple[dict, dict]:
    """Config values overlaid by explicit flags. Returns (command params, optimizer options)."""
    raw = {}
    if args.config:
        try:
            raw.update(read_config(args.config))
        except OSError as exc:
            raise OSError(f"cannot read config {args.config}: {exc}") from exc
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            raw[k] = v
    if getattr(args, "seed", None) is not None:
        raw["seed"] = args.seed
    params, opts = {}, {}
    for k, v in raw.items():
        if k in keys:
            params[k] = _coerce(k, v, keys[k])
        elif allow_options and k in OPTION_KEYS:
            opts[k] = v
        elif k == "seed":
            params[k] = _coerce(k, v, int)
        else:
            raise UsageError(f"{k}: unknown parameter")
    return params, opts


def _require(params, key):
    if params.get(key) is None:
        raise UsageError(f"{key}: required")
    return params[key]


def _get(params, key, default):
    v = params.get(key)
    return default if v is None else v


def _check_p(p, key="p"):
    if not p > 1:
        raise UsageError(f"{key}: p must satisfy p > 1, got {p}")
    return float(p)


def _check_positive(params, key):
    if params.get(key) is not None and not params[key] > 0:
        raise UsageError(f"{key}: must be positive, got {params[key]}")


def _options(opts: dict) -> MinimizeOptions:
    try:
        return MinimizeOptions.from_mapping(opts)
    except (KeyError, ValueError) as exc:
        raise UsageError(str(exc).strip("'\"")) from None


def _grid(nodes) -> "object":
    counts = parse_nodes(nodes)
    if len(counts) not in (1, 2):
        raise UsageError(f"nodes: expected 1 or 2 axes, got {len(counts)}")
    try:
        return make_grid(len(counts), [(0.0, 1.0)] * len(counts), counts if len(counts) > 1 else counts[0])
    except ValueError as exc:
        raise UsageError(f"nodes: {exc}") from None


# -- result conversion -----------------------------------------------------


def trajectory_to_dict(traj: Trajectory, zero: float | None = None) -> dict:
    d = {"p": traj.p, "lambda": traj.lam, "tol": traj.tol, "t_end": traj.t_end}
    if zero is not None:
        d["first_zero"] = zero
    d.update({
        "energy_drift": traj.energy_drift(),
        "t": traj.t,
        "u": traj.u,
        "v": traj.v,
        "energy": traj.energy(),
    })
    return d


def _rows(header: str, columns: list[str], rows) -> str:
    lines = [f"# {header}", ",".join(columns)]
    lines += [",".join(repr(float(x)) if not isinstance(x, (int, np.integer)) else str(x) for x in r)
              for r in rows]
    return "\n".join(lines) + "\n"


def _need(result: dict, key: str, kind: str):
    if key not in result:
        raise UsageError(f"kind {kind!r} needs a result with {key!r}")
    return result[key]


def export_plot_data(result, kind: str) -> str:
    """Plot-ready CSV for a result (object or its JSON dict); the first line is a '#' column legend."""
    if kind not in EXPORT_KINDS:
        raise UsageError(f"kind: unknown export kind {kind!r}; choose from {', '.join(EXPORT_KINDS)}")
    if isinstance(result, Trajectory):
        result = trajectory_to_dict(result)
    elif hasattr(result, "to_dict"):
        result = result.to_dict()
    if kind == "trajectory":
        t = np.asarray(_need(result, "t", kind), dtype=float)
        u = np.asarray(result["u"], dtype=float).reshape(t.size, -1)
        v = np.asarray(result["v"], dtype=float).reshape(t.size, -1)
        e = np.asarray(result["energy"], dtype=float)
        n = u.shape[1]
        cols = ["t"] + [f"u{i + 1}" for i in range(n)] + [f"v{i + 1}" for i in range(n)] + ["energy"]
        return _rows(f"trajectory p={result['p']!r}; columns: {', '.join(cols)}", cols,
                     np.column_stack([t, u, v, e]))
    if kind == "eigenfunction":
        f = field_from_dict(_need(result, "field", kind))
        cols = ["x", "y"][: f.grid.dim] + [f"u{i + 1}" for i in range(f.N)]
        return (f"# eigenfunction lambda={result.get('lambda')!r} p={result.get('p')!r}; "
                f"columns: {', '.join(cols)}\n" + field_to_csv(f))
    if kind == "history":
        hist = _need(result, "quotient_history", kind)
        return _rows("descent history; columns: iteration, quotient", ["iteration", "quotient"],
                     [(i, q) for i, q in enumerate(hist)])
    entries = _need(result, "entries", kind)
    cf = result["closed_form"]
    rows = [(e["k"], e["lambda"], c, abs(e["lambda"] - c) / c) for e, c in zip(entries, cf)]
    return _rows(f"ladder p={result['p']!r}; columns: k, lambda_k (shooting), k^p*lambda_p (closed form), "
                 "relative error", ["k", "lambda", "closed_form", "relative_error"], rows)


def _flatten(d, prefix=""):
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            yield from _flatten(v, key + ".")
        else:
            yield key, v


# -- commands --------------------------------------------------------------


def cmd_psine(args):
    params, _ = merged_params(args, {"p": float, "tend": float, "tol": float}, False)
    p = _check_p(_require(params, "p"))
    _check_positive(params, "tend")
    _check_positive(params, "tol")
    tol = _get(params, "tol", 1e-10)
    t_end = _get(params, "tend", 2 * half_period(p))
    traj = psine(p, t_end, tol)
    d = trajectory_to_dict(traj, first_zero(p, tol))
    if args.format == "csv":
        return export_plot_data(d, "trajectory"), f"psine-p{p:g}", 0
    return dumps(d), f"psine-p{p:g}", 0


def cmd_ladder(args):
    params, _ = merged_params(args, {"p": float, "kmax": int, "tol": float}, False)
    p = _check_p(_require(params, "p"))
    kmax = _get(params, "kmax", 3)
    if kmax < 1:
        raise UsageError(f"kmax: must be >= 1, got {kmax}")
    _check_positive(params, "tol")
    lad = shoot_ladder(p, kmax, _get(params, "tol", 1e-10))
    text = lad.to_csv() if args.format == "csv" else lad.to_json()
    return text, f"ladder-p{p:g}", 0


def _eig_output(res, args, stem):
    if args.format == "csv":
        return export_plot_data(res, "eigenfunction"), stem, 0
    return res.to_json(), stem, 0


def cmd_eig_local(args):
    params, raw_opts = merged_params(args, {"p": float, "N": int, "nodes": str}, True)
    p = _check_p(_require(params, "p"))
    N = _get(params, "N", 1)
    if N < 1:
        raise UsageError(f"N: must be >= 1, got {N}")
    grid = _grid(_get(params, "nodes", "201"))
    opts = _options(raw_opts)
    res = minimize_local(grid, N, p, opts)
    return _eig_output(res, args, f"eig-local-p{p:g}-N{N}")


def cmd_eig_frac(args):
    params, raw_opts = merged_params(
        args, {"s": float, "p": float, "N": int, "nodes": str, "cache_dir": str}, True)
    p = _check_p(_require(params, "p"))
    s = _get(params, "s", 0.5)
    if not 0 < s < 1:
        raise UsageError(f"s: must lie in (0, 1), got {s}")
    N = _get(params, "N", 1)
    if N < 1:
        raise UsageError(f"N: must be >= 1, got {N}")
    grid = _grid(_get(params, "nodes", "101"))
    if grid.dim != 1:
        raise UsageError("nodes: fractional energies need a 1D grid")
    opts = _options(raw_opts)
    fp = FracParams(s, p)
    cache = params.get("cache_dir")
    kern = load_or_assemble(cache, grid, fp) if cache else assemble_kernel(grid, fp)
    res = minimize_fractional(grid, N, fp, opts, kern)
    return _eig_output(res, args, f"eig-frac-s{s:g}-p{p:g}-N{N}")


VERIFY_KEYS = {"p": float, "N": int, "nodes": str, "s": float, "samples": int, "count": int,
               "fields": int, "tol": float, "kmax": int, "theorem": str}


def cmd_verify(args):
    params, _ = merged_params(args, VERIFY_KEYS, False)
    theorem = _require(params, "theorem")
    if theorem not in CHECKS:
        raise UsageError(f"theorem: unknown id {theorem!r}; choose from {', '.join(CHECKS)}")
    accepted = inspect.signature(CHECKS[theorem]).parameters
    kwargs = {}
    for k, v in params.items():
        if k == "theorem":
            continue
        if k == "p":
            _check_p(v)
            if "ps" in accepted:
                k, v = "ps", (v,)
            if theorem == "lemma-3.1-ineq" and not v[0] <= 2:
                raise UsageError(f"p: monotonicity bounds need 1 < p <= 2, got {v[0]}")
        elif k == "nodes":
            counts = parse_nodes(v)
            if "dim" in accepted:
                kwargs["dim"] = len(counts)
            v = counts[0]
            if v < 3:
                raise UsageError(f"nodes: need at least 3, got {v}")
        elif k == "kmax":
            k = "k_max"
        if k not in accepted:
            raise UsageError(f"{k}: not a parameter of {theorem}")
        kwargs[k] = v
    rep = run_check(theorem, **kwargs)
    print(f"{theorem}: {'PASS' if rep.passed else 'FAIL'} ({rep.runtime:.2f} s)", file=sys.stderr)
    if args.format == "csv":
        lines = [f"# verify {theorem}; columns: key, value", "key,value",
                 f"pass,{str(rep.passed).lower()}"]
        lines += [f"{k},{v!r}" for k, v in _flatten({"measured": rep.measured, "tolerances": rep.tolerances})]
        text = "\n".join(lines) + "\n"
    else:
        text = rep.to_json(timing=args.timing)
    return text, f"verify-{theorem}", 0 if rep.passed else 1


def cmd_export(args):
    if not args.input:
        raise UsageError("input: required")
    try:
        result = json.loads(Path(args.input).read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"input: not a JSON result ({exc})") from None
    return export_plot_data(result, args.kind), f"{Path(args.input).stem}-{args.kind}", 0


# -- argument parsing ------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vecplap", description="Vectorial p-Laplacian eigenvalue lab.")
    sub = ap.add_subparsers(dest="command", required=True, metavar="command")

    def common(sp, formats=("json", "csv")):
        sp.add_argument("--config", help="flat key=value file; explicit flags win")
        sp.add_argument("--output", "-o", help="output file (default: $%s/<name> or stdout)" % OUTPUT_ENV)
        sp.add_argument("--format", choices=formats, default="json")
        sp.add_argument("--seed", type=int, default=None)

    sp = sub.add_parser("psine", help="integrate the p-sine initial value problem")
    common(sp)
    sp.add_argument("--p", type=float)
    sp.add_argument("--tend", type=float, help="horizon (default: one full period)")
    sp.add_argument("--tol", type=float)
    sp.set_defaults(func=cmd_psine)

    sp = sub.add_parser("ladder", help="Dirichlet eigenvalues on (0, 1) by shooting")
    common(sp)
    sp.add_argument("--p", type=float)
    sp.add_argument("--kmax", type=int)
    sp.add_argument("--tol", type=float)
    sp.set_defaults(func=cmd_ladder)

    for name, func, frac in (("eig-local", cmd_eig_local, False), ("eig-frac", cmd_eig_frac, True)):
        sp = sub.add_parser(name, help=("minimize the fractional quotient" if frac
                                        else "minimize the local quotient"))
        common(sp)
        sp.add_argument("--p", type=float)
        sp.add_argument("--N", type=int)
        sp.add_argument("--nodes", help="node count, or AxB for a 2D grid")
        if frac:
            sp.add_argument("--s", type=float)
            sp.add_argument("--cache-dir", dest="cache_dir", help="directory for kernel sidecar files")
        sp.set_defaults(func=func)

    sp = sub.add_parser("verify", help="run one theorem check")
    common(sp)
    sp.add_argument("--theorem", choices=list(CHECKS))
    for k, kind in VERIFY_KEYS.items():
        if k != "theorem":
            sp.add_argument(f"--{k}", type=kind)
    sp.add_argument("--timing", action="store_true", help="include runtime in the JSON report")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("export", help="plot-ready CSV from a JSON result")
    common(sp, formats=("csv",))
    sp.add_argument("--input", "-i", help="JSON result file written by another command")
    sp.add_argument("--kind", choices=EXPORT_KINDS, required=True)
    sp.set_defaults(func=cmd_export, format="csv")
    return ap


def _write(text: str, args, stem: str):
    ext = "csv" if args.format == "csv" else "json"
    target = args.output
    if not target and os.environ.get(OUTPUT_ENV):
        target = str(Path(os.environ[OUTPUT_ENV]) / f"{stem}.{ext}")
    if not target:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
        return
    path = Path(target)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text if text.endswith("\n") else text + "\n")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        text, stem, status = args.func(args)
        _write(text, args, stem)
        return status
    except UsageError as exc:
        print(f"vecplap {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (MinimizationStall, IntegrationError) as exc:
        print(f"vecplap {args.command}: failed: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"vecplap {args.command}: io error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"vecplap {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
