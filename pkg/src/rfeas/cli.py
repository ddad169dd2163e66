"""Command-line front end.

    rfeas eval     --builtin ex5 --point theta=1.5
    rfeas volume   --builtin ex4 --samples 4000000 --seed 1
    rfeas bbox     --builtin ex2 --method opt
    rfeas boundary --builtin ex4 --grid 512 --out b.csv
    rfeas heatmap  --builtin ex2 --grid 256 --out h.ppm
    rfeas sweep    --builtin ex5 --var theta --range 1:2:0.25
    rfeas critical --builtin ex1
    rfeas builtin  --list

Exit codes: eval returns 0 when the point is feasible (or on the boundary),
1 when infeasible; every command returns 2 on usage, parse, or dimension
errors.  ``--json`` replaces the human-readable report with a JSON document
whose floats are exactly the printed values (shortest round-trip form).
Problems with control variables are evaluated closed loop: eval/sweep/
critical minimize over the control box per point, and volume/bbox explore
the projected region of uncertain parameters for which some admissible
control exists.  boundary/heatmap always draw the full variable space and
need exactly two free variables.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import outputs
from .dsl import DslError, Problem, parse_problem
from .expr import ExprError, fmt_float
from .problems import builtin_names, builtin_source, get_builtin
from .region import (
    DimensionMismatchError,
    NoConvergenceError,
    NoFeasibleSamplesError,
    SampleEvalError,
    boundary_2d,
    box_of,
    grid_field,
    mc_bbox,
    mc_volume,
    opt_bbox,
)
from .rfuncs import build_region, psi_open
from .solver import (
    NoControlVariablesError,
    ProjectedRegion,
    SolverOptions,
    critical_search,
    psi_closed,
    sweep,
)


class CliError(Exception):
    pass


def _load_problem(args) -> Problem:
    if args.builtin and args.problem:
        raise CliError("use either --builtin or --problem, not both")
    if args.builtin:
        try:
            return get_builtin(args.builtin)
        except KeyError as exc:
            raise CliError(exc.args[0]) from exc
    if args.problem:
        try:
            with open(args.problem) as fh:
                text = fh.read()
        except OSError as exc:
            raise CliError(f"cannot read problem file: {exc}") from exc
        return parse_problem(text)
    raise CliError("a problem is required (--builtin NAME or --problem FILE)")


def _parse_point(text: str) -> dict[str, float]:
    point = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise CliError(f"bad point component '{part}' (expected name=value)")
        name, _, value = part.partition("=")
        try:
            point[name.strip()] = float(value)
        except ValueError:
            raise CliError(f"bad numeric value in point component '{part}'") from None
    if not point:
        raise CliError("empty --point")
    return point


def _parse_range(text: str) -> tuple[float, float, float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise CliError(f"bad range '{text}' (expected lo:hi:step)")
    try:
        lo, hi, step = (float(p) for p in parts)
    except ValueError:
        raise CliError(f"bad number in range '{text}'") from None
    if step <= 0 or hi < lo:
        raise CliError(f"bad range '{text}' (need lo <= hi and step > 0)")
    return lo, hi, step


def _opts(args) -> SolverOptions:
    return SolverOptions(seed=args.seed)


def _exploration_region(problem: Problem, opts: SolverOptions):
    """Projected region when controls exist, plain region otherwise."""
    if problem.controls:
        return ProjectedRegion(problem, opts)
    return build_region(problem)


def _emit(args, human_lines: list[str], doc: dict) -> None:
    if args.json:
        print(json.dumps(doc))
    else:
        for line in human_lines:
            print(line)


def _box_doc(box):
    return [{"name": n, "lo": lo, "hi": hi} for n, lo, hi in box]


# ----------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------

def cmd_eval(args) -> int:
    problem = _load_problem(args)
    if not args.point:
        raise CliError("eval needs --point")
    point = _parse_point(args.point)
    uncertain = {v.name for v in problem.uncertain}
    unknown = set(point) - uncertain
    if unknown:
        raise CliError(
            f"point names {sorted(unknown)} are not uncertain variables of "
            f"'{problem.name}' (expected: {sorted(uncertain)})"
        )
    missing = uncertain - set(point)
    if missing:
        raise CliError(f"point must cover uncertain variable(s) {sorted(missing)}")
    opts = _opts(args)
    pe = (
        psi_closed(problem, point, opts)
        if problem.controls
        else psi_open(problem, point)
    )
    tol = args.tol if args.tol is not None else 1e-9
    if abs(pe.psi) <= tol:
        verdict = "boundary"
    elif pe.psi < 0:
        verdict = "feasible"
    else:
        verdict = "infeasible"
    lines = [
        f"problem: {problem.name}",
        f"point: {_fmt_env(point)}",
        f"psi = {fmt_float(pe.psi)}",
        f"verdict: {verdict}",
    ]
    lines.extend(f"  {label} = {fmt_float(v)}" for label, v in pe.per_constraint)
    lines.append(f"active: {pe.active_label}")
    if pe.z_star is not None:
        lines.append(f"z* : {_fmt_env(pe.z_star)}")
    if not pe.in_domain:
        lines.append("note: point lies outside the declared parameter domain")
    doc = {
        "command": "eval",
        "problem": problem.name,
        "point": point,
        "psi": pe.psi,
        "verdict": verdict,
        "constraints": [{"label": l, "value": v} for l, v in pe.per_constraint],
        "active_label": pe.active_label,
        "z_star": pe.z_star,
        "converged": pe.converged,
        "in_domain": pe.in_domain,
    }
    _emit(args, lines, doc)
    return 0 if verdict in ("feasible", "boundary") else 1


def _fmt_env(env: dict[str, float]) -> str:
    return ", ".join(f"{k} = {fmt_float(v)}" for k, v in env.items())


def cmd_volume(args) -> int:
    problem = _load_problem(args)
    opts = _opts(args)
    region = _exploration_region(problem, opts)
    samples = args.samples if args.samples is not None else 100000
    est = mc_volume(region, samples=samples, seed=args.seed, threads=args.threads)
    lines = [
        f"problem: {problem.name}" + (" (projected over controls)" if problem.controls else ""),
        f"volume = {fmt_float(est.volume)} +/- {fmt_float(est.std_error)}",
        f"hits/samples: {est.hits}/{est.samples}  seed: {est.seed}",
        "box: " + ", ".join(f"{n} in [{fmt_float(lo)}, {fmt_float(hi)}]" for n, lo, hi in est.sampling_box),
    ]
    doc = {
        "command": "volume",
        "problem": problem.name,
        "projected": bool(problem.controls),
        "volume": est.volume,
        "std_error": est.std_error,
        "hits": est.hits,
        "samples": est.samples,
        "seed": est.seed,
        "box": _box_doc(est.sampling_box),
    }
    _emit(args, lines, doc)
    return 0


def cmd_bbox(args) -> int:
    problem = _load_problem(args)
    opts = _opts(args)
    region = _exploration_region(problem, opts)
    if args.method == "mc":
        samples = args.samples if args.samples is not None else 100000
        bb = mc_bbox(region, samples=samples, seed=args.seed, threads=args.threads)
    else:
        # For the optimization method --samples means starts per direction.
        starts = args.samples if args.samples is not None else 8
        bb = opt_bbox(region, starts_per_direction=starts, seed=args.seed)
    lines = [f"problem: {problem.name}  method: {bb.method}  effort: {bb.effort}"]
    lines.extend(f"  {n}: [{fmt_float(lo)}, {fmt_float(hi)}]" for n, lo, hi in bb.dims)
    doc = {
        "command": "bbox",
        "problem": problem.name,
        "method": bb.method,
        "dims": _box_doc(bb.dims),
        "effort": bb.effort,
        "seed": bb.seed,
    }
    _emit(args, lines, doc)
    return 0


def cmd_boundary(args) -> int:
    problem = _load_problem(args)
    region = build_region(problem)
    tol = args.tol if args.tol is not None else 1e-8
    b = boundary_2d(region, grid_n=args.grid, tol=tol)
    csv = outputs.boundary_csv(b)
    if args.out:
        outputs.write_text(args.out, csv)
        root, ext = os.path.splitext(args.out)
        svg_path = (root if ext.lower() == ".csv" else args.out) + ".svg"
        outputs.write_text(svg_path, outputs.boundary_svg(b, box_of(region)))
    nvert = sum(len(p) for p in b.polylines)
    lines = [
        f"problem: {problem.name}  grid: {b.grid_n}  tol: {fmt_float(b.tol)}",
        f"polylines: {len(b.polylines)} ({sum(b.closed)} closed), vertices: {nvert}",
    ]
    if args.out:
        lines.append(f"wrote {args.out} and the .svg overlay")
    doc = {
        "command": "boundary",
        "problem": problem.name,
        "grid": b.grid_n,
        "tol": b.tol,
        "x": b.x_name,
        "y": b.y_name,
        "closed": list(b.closed),
        "polylines": [[[x, y] for x, y in poly] for poly in b.polylines],
    }
    if not args.out and not args.json:
        print(csv, end="")
        return 0
    _emit(args, lines, doc)
    return 0


def cmd_heatmap(args) -> int:
    problem = _load_problem(args)
    region = build_region(problem)
    field = grid_field(region, nx=args.grid, ny=args.grid)
    if not args.out:
        raise CliError("heatmap needs --out PATH for the binary pixmap")
    try:
        outputs.write_ppm(args.out, field)
    except OSError as exc:
        raise CliError(f"cannot write {args.out}: {exc}") from exc
    lines = [
        f"problem: {problem.name}",
        f"wrote {args.out} ({field.nx}x{field.ny} P6) and sidecar {args.out}.txt",
    ]
    doc = {
        "command": "heatmap",
        "problem": problem.name,
        "out": args.out,
        "nx": field.nx,
        "ny": field.ny,
        "value_min": float(field.values.min()),
        "value_max": float(field.values.max()),
        "x": {"name": field.x_name, "lo": field.x_range[0], "hi": field.x_range[1]},
        "y": {"name": field.y_name, "lo": field.y_range[0], "hi": field.y_range[1]},
    }
    _emit(args, lines, doc)
    return 0


def cmd_sweep(args) -> int:
    problem = _load_problem(args)
    if not args.var or not args.range:
        raise CliError("sweep needs --var NAME and --range lo:hi:step")
    if len(args.var) != len(args.range):
        raise CliError("each --var needs a matching --range")
    grids = [_parse_range(r) for r in args.range]
    fixed = _parse_point(args.point) if args.point else {}
    result = sweep(problem, args.var, grids, _opts(args), fixed=fixed)
    control_names = [v.name for v in problem.controls]
    header = (
        list(args.var)
        + sorted(fixed)
        + ["psi"]
        + [f"{n}_star" for n in control_names]
        + ["active_label"]
    )
    rows = []
    for row in result.rows:
        cells = [row.x[n] for n in args.var]
        cells += [row.x[n] for n in sorted(fixed)]
        cells.append(row.psi)
        if row.z_star:
            cells.extend(row.z_star[n] for n in control_names)
        cells.append(row.active_label)
        rows.append(cells)
    csv = outputs.csv_text(header, rows)
    if args.out:
        outputs.write_text(args.out, csv)
    doc = {
        "command": "sweep",
        "problem": problem.name,
        "vars": list(args.var),
        "rows": [
            {"x": row.x, "psi": row.psi, "z_star": row.z_star, "active_label": row.active_label}
            for row in result.rows
        ],
    }
    if args.json:
        _emit(args, [], doc)
    elif args.out:
        print(f"wrote {args.out} ({len(result.rows)} rows)")
    else:
        print(csv, end="")
    return 0


def cmd_critical(args) -> int:
    problem = _load_problem(args)
    cr = critical_search(problem, _opts(args))
    lines = [
        f"problem: {problem.name}",
        f"worst case: {_fmt_env(cr.x_star)}",
        f"psi_max = {fmt_float(cr.psi_max)}",
    ]
    if len(cr.candidates) > 1:
        lines.append("ties within tolerance:")
        lines.extend(f"  {_fmt_env(x)} (psi = {fmt_float(v)})" for x, v in cr.candidates)
    doc = {
        "command": "critical",
        "problem": problem.name,
        "x_star": cr.x_star,
        "psi_max": cr.psi_max,
        "candidates": [{"x": x, "psi": v} for x, v in cr.candidates],
        "converged": cr.converged,
    }
    _emit(args, lines, doc)
    return 0


def cmd_builtin(args) -> int:
    if bool(args.list) == bool(args.emit):
        raise CliError("use exactly one of --list or --emit NAME")
    if args.list:
        names = list(builtin_names())
        _emit(args, names, {"command": "builtin", "names": names})
        return 0
    try:
        text = builtin_source(args.emit)
    except KeyError as exc:
        raise CliError(exc.args[0]) from exc
    if args.json:
        print(json.dumps({"command": "builtin", "name": args.emit, "text": text}))
    else:
        print(text, end="")
    return 0


# ----------------------------------------------------------------------
# Argument parsing
# ----------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rfeas",
        description="Feasibility-region analysis with R-function composition.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, point=False, samples=False, grid=False, rng_seed=True):
        group = p.add_mutually_exclusive_group()
        group.add_argument("--builtin", metavar="NAME", help="built-in problem name")
        group.add_argument("--problem", metavar="FILE", help="problem file path")
        if point:
            p.add_argument("--point", metavar="STR", help="comma-separated name=value pairs")
        if samples:
            p.add_argument("--samples", type=int, default=None, metavar="N")
        if grid:
            p.add_argument("--grid", type=int, default=256, metavar="N")
        if rng_seed:
            p.add_argument("--seed", type=int, default=0, metavar="S")
        p.add_argument("--tol", type=float, default=None, metavar="X")
        p.add_argument("--threads", type=int, default=None, metavar="N")
        p.add_argument("--out", metavar="PATH")
        p.add_argument("--json", action="store_true")

    p = sub.add_parser("eval", help="feasibility of one point")
    common(p, point=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("volume", help="Monte Carlo region volume")
    common(p, samples=True)
    p.set_defaults(func=cmd_volume)

    p = sub.add_parser("bbox", help="axis-aligned bounding box")
    common(p, samples=True)
    p.add_argument("--method", choices=("mc", "opt"), default="mc")
    p.set_defaults(func=cmd_bbox)

    p = sub.add_parser("boundary", help="2-D zero contour as CSV/SVG")
    common(p, grid=True)
    p.set_defaults(func=cmd_boundary)

    p = sub.add_parser("heatmap", help="2-D field as a binary P6 pixmap")
    common(p, grid=True)
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("sweep", help="psi over a parameter grid")
    common(p, point=True)
    p.add_argument("--var", action="append", metavar="NAME")
    p.add_argument("--range", action="append", metavar="LO:HI:STEP")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("critical", help="worst-case parameter search")
    common(p)
    p.set_defaults(func=cmd_critical)

    p = sub.add_parser("builtin", help="list or emit built-in problems")
    p.add_argument("--list", action="store_true")
    p.add_argument("--emit", metavar="NAME")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_builtin)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, DslError, ExprError, DimensionMismatchError,
            NoFeasibleSamplesError, NoConvergenceError, SampleEvalError,
            NoControlVariablesError, ValueError) as exc:
        print(f"rfeas: error: {exc}", file=sys.stderr)
        return 2


def entry():  # console-script target
    raise SystemExit(main())


if __name__ == "__main__":
    raise SystemExit(main())
