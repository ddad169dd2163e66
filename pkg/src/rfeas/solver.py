"""Closed-loop feasibility: inner minimization over controls, parameter
sweeps, and worst-case (critical point) search.

The closed-loop feasibility function is psi(x) = min over the control box of
-R(z, x).  With alpha = 1 the objective is a max of constraint surfaces, so
it carries kinks and gradient-based inner solvers are out.  The inner
minimizer is derivative-free throughout:

* one control: a coarse uniform grid over the control box brackets the
  discrete minimum, then golden-section contraction refines the bracketing
  cell (two probes per iteration, no reuse bookkeeping);
* two controls: a coarse grid seeds Nelder-Mead refinement;
* three or more: scrambled-Sobol multistarts seed Nelder-Mead.

Everything is deterministic for a fixed seed.  When the evaluation budget
runs out the best value so far is returned with ``converged=False`` rather
than raising.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize as _sciopt
from scipy.stats import qmc as _qmc

from .dsl import Problem
from .expr import Env, Expr, UnboundVariableError, eval_arrays, eval_expr, substitute
from .rfuncs import (
    PsiEval,
    RegionExpr,
    active_constraint,
    build_region,
    constraint_values,
    point_in_domain,
    psi_open,
)

__all__ = [
    "SolverOptions", "SweepRow", "SweepResult", "CriticalResult",
    "psi_closed", "sweep", "critical_search", "ProjectedRegion",
    "NoControlVariablesError",
]

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0
_INVPHI2 = (3.0 - math.sqrt(5.0)) / 2.0


class NoControlVariablesError(ValueError):
    def __init__(self, problem_name: str):
        super().__init__(
            f"problem '{problem_name}' has no control variables; use psi_open"
        )


@dataclass(frozen=True, slots=True)
class SolverOptions:
    """Numerical contract for the inner minimizer and the search routines."""

    coarse_grid_per_dim: int = 65
    multistart_count: int = 5
    z_tolerance: float = 1e-8
    value_tolerance: float = 1e-10
    max_inner_evals: int = 20000
    seed: int = 0

    def __post_init__(self):
        if self.coarse_grid_per_dim < 1 or self.multistart_count < 1 or self.max_inner_evals < 1:
            raise ValueError("counts must be >= 1")
        if self.z_tolerance <= 0 or self.value_tolerance <= 0:
            raise ValueError("tolerances must be > 0")


def _golden_rounds(width: float, target: float) -> int:
    if width <= target or width <= 0.0:
        return 0
    return int(math.ceil(math.log(target / width) / math.log(_INVPHI)))


def _interval_target(zlo: float, zhi: float) -> float:
    # Contract the bracket well below z_tolerance so the *value* at the
    # returned point is accurate near kinks (slope * interval ~ 1e-12).
    return 1e-13 * max(1.0, abs(zlo), abs(zhi))


# ----------------------------------------------------------------------
# 1-D inner minimization, scalar and batched
# ----------------------------------------------------------------------

def _min_1d_scalar(f, zlo: float, zhi: float, opts: SolverOptions):
    """Grid + golden section minimization of a scalar function on [zlo, zhi].

    Returns (z_best, f_best, evals, converged).  The returned value is the
    minimum over every probe, so it never exceeds any sampled candidate.
    """
    grid_n = max(2, opts.coarse_grid_per_dim)
    zs = np.linspace(zlo, zhi, grid_n)
    best_i = 0
    best_z = float(zs[0])
    best_f = f(best_z)
    evals = 1
    for i in range(1, grid_n):
        z = float(zs[i])
        fz = f(z)
        evals += 1
        if fz < best_f:
            best_f, best_z, best_i = fz, z, i
    lo = float(zs[max(best_i - 1, 0)])
    hi = float(zs[min(best_i + 1, grid_n - 1)])
    rounds = _golden_rounds(hi - lo, _interval_target(zlo, zhi))
    exhausted = False
    for _ in range(rounds):
        if evals + 2 > opts.max_inner_evals:
            exhausted = True
            break
        h = hi - lo
        c = lo + _INVPHI2 * h
        d = lo + _INVPHI * h
        fc = f(c)
        fd = f(d)
        evals += 2
        if fc < best_f:
            best_f, best_z = fc, c
        if fd < best_f:
            best_f, best_z = fd, d
        if fc < fd:
            hi = d
        else:
            lo = c
    if evals < opts.max_inner_evals:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        evals += 1
        if fm < best_f:
            best_f, best_z = fm, mid
    converged = (hi - lo) < opts.z_tolerance and not exhausted
    return best_z, best_f, evals, converged


def _min_1d_batch(f, zlo: float, zhi: float, n: int, opts: SolverOptions):
    """Vectorized grid + golden section over a batch of n independent problems.

    ``f`` maps an array of n control values to an array of n objective values
    (each row its own problem).  Returns (z_best, f_best, evals_per_row,
    converged); results are independent of how the batch is chunked.
    """
    grid_n = max(2, opts.coarse_grid_per_dim)
    zs = np.linspace(zlo, zhi, grid_n)
    best_f = f(np.full(n, zs[0]))
    best_z = np.full(n, zs[0])
    best_i = np.zeros(n, dtype=np.int64)
    evals = 1
    for i in range(1, grid_n):
        fz = f(np.full(n, zs[i]))
        evals += 1
        better = fz < best_f
        best_f = np.where(better, fz, best_f)
        best_z = np.where(better, zs[i], best_z)
        best_i = np.where(better, i, best_i)
    lo = zs[np.maximum(best_i - 1, 0)]
    hi = zs[np.minimum(best_i + 1, grid_n - 1)]
    rounds = _golden_rounds(float(np.max(hi - lo)), _interval_target(zlo, zhi))
    exhausted = False
    for _ in range(rounds):
        if evals + 2 > opts.max_inner_evals:
            exhausted = True
            break
        h = hi - lo
        c = lo + _INVPHI2 * h
        d = lo + _INVPHI * h
        fc = f(c)
        fd = f(d)
        evals += 2
        better = fc < best_f
        best_f = np.where(better, fc, best_f)
        best_z = np.where(better, c, best_z)
        better = fd < best_f
        best_f = np.where(better, fd, best_f)
        best_z = np.where(better, d, best_z)
        choose = fc < fd
        hi = np.where(choose, d, hi)
        lo = np.where(choose, lo, c)
    if evals < opts.max_inner_evals:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        evals += 1
        better = fm < best_f
        best_f = np.where(better, fm, best_f)
        best_z = np.where(better, mid, best_z)
    converged = bool(np.max(hi - lo) < opts.z_tolerance) and not exhausted
    return best_z, best_f, evals, converged


# ----------------------------------------------------------------------
# psi_closed
# ----------------------------------------------------------------------

def psi_closed(
    p: Problem,
    x: Env,
    opts: SolverOptions | None = None,
    region: RegionExpr | None = None,
) -> PsiEval:
    """Closed-loop feasibility at ``x``: minimize -R(z, x) over the control box."""
    opts = opts or SolverOptions()
    controls = p.controls
    if not controls:
        raise NoControlVariablesError(p.name)
    if region is None:
        region = build_region(p)

    fixed = substitute(region.expr, dict(x))
    control_names = {v.name for v in controls}
    missing = fixed.variables() - control_names
    if missing:
        raise UnboundVariableError(sorted(missing)[0])

    if len(controls) == 1:
        zvar = controls[0]

        def objective(zv: float) -> float:
            return -eval_expr(fixed, {zvar.name: zv})

        z_best, f_best, evals, converged = _min_1d_scalar(objective, zvar.lo, zvar.hi, opts)
        z_star = {zvar.name: z_best}
    else:
        z_star, f_best, evals, converged = _min_nd(fixed, controls, opts)

    values = constraint_values(p, {**dict(x), **z_star})
    return PsiEval(
        psi=f_best,
        per_constraint=values,
        active_label=active_constraint(values),
        z_star=z_star,
        converged=converged,
        inner_evals=evals,
        in_domain=point_in_domain(p, x),
    )


def _sobol_points(dim: int, count: int, seed: int) -> np.ndarray:
    sampler = _qmc.Sobol(d=dim, scramble=True, seed=seed)
    m = max(1, math.ceil(math.log2(max(count, 1))))
    return sampler.random_base2(m)[:count]


def _min_nd(fixed: Expr, controls, opts: SolverOptions):
    """Multidimensional inner minimization: grid or Sobol starts + Nelder-Mead."""
    names = [v.name for v in controls]
    lo = np.array([v.lo for v in controls])
    hi = np.array([v.hi for v in controls])
    dim = len(names)
    counter = {"n": 0}

    def objective(zvec) -> float:
        counter["n"] += 1
        return -eval_expr(fixed, dict(zip(names, np.asarray(zvec, dtype=float))))

    starts: list[np.ndarray]
    if dim == 2:
        g = max(2, opts.coarse_grid_per_dim)
        axes = [np.linspace(lo[k], hi[k], g) for k in range(dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        arrays = {name: m.ravel() for name, m in zip(names, mesh)}
        vals = -eval_arrays(fixed, arrays)
        counter["n"] += vals.size
        order = np.argsort(vals, kind="stable")
        starts = [np.array([arrays[nm][i] for nm in names]) for i in order[: opts.multistart_count]]
    else:
        unit = _sobol_points(dim, opts.multistart_count, opts.seed)
        starts = [lo + u * (hi - lo) for u in unit]
        starts.append(0.5 * (lo + hi))

    best_z = np.asarray(starts[0], dtype=float)
    best_f = objective(best_z)
    converged = True
    for s in starts:
        budget = opts.max_inner_evals - counter["n"]
        if budget <= dim + 1:
            converged = False
            break
        res = _sciopt.minimize(
            objective,
            s,
            method="Nelder-Mead",
            bounds=list(zip(lo, hi)),
            options={
                "xatol": opts.z_tolerance * 1e-2,
                "fatol": opts.value_tolerance * 1e-2,
                "maxfev": budget,
            },
        )
        if res.fun < best_f:
            best_f = float(res.fun)
            best_z = np.asarray(res.x, dtype=float)
        if not res.success:
            converged = False
    return dict(zip(names, (float(v) for v in best_z))), best_f, counter["n"], converged


# ----------------------------------------------------------------------
# Sweeps
# ----------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class SweepRow:
    x: dict[str, float]
    psi: float
    z_star: dict[str, float] | None
    active_label: str


@dataclass(frozen=True, slots=True)
class SweepResult:
    rows: tuple[SweepRow, ...]


def grid_values(lo: float, hi: float, step: float) -> list[float]:
    if step <= 0:
        raise ValueError("step must be > 0")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [lo + i * step for i in range(max(count, 1))]


def sweep(
    p: Problem,
    var_names: list[str],
    grids: list[tuple[float, float, float]],
    opts: SolverOptions | None = None,
    fixed: Env | None = None,
) -> SweepResult:
    """Evaluate psi on the Cartesian grid of the named uncertain variables.

    Unlisted uncertain variables must be pinned through ``fixed``.  Rows come
    out in row-major grid order (last variable fastest).
    """
    opts = opts or SolverOptions()
    fixed = dict(fixed or {})
    if len(var_names) != len(grids):
        raise ValueError("var_names and grids must have the same length")
    uncertain = {v.name for v in p.uncertain}
    for name in var_names:
        if name not in uncertain:
            raise ValueError(f"'{name}' is not an uncertain variable of '{p.name}'")
    stray = set(fixed) - (uncertain - set(var_names))
    if stray:
        raise ValueError(f"fixed value(s) {sorted(stray)} are not unswept uncertain variables")
    unpinned = uncertain - set(var_names) - set(fixed)
    if unpinned:
        raise ValueError(
            f"uncertain variable(s) {sorted(unpinned)} are neither swept nor fixed"
        )

    region = build_region(p)
    closed = bool(p.controls)
    axes = [grid_values(*g) for g in grids]
    rows = []
    for combo in itertools.product(*axes):
        x = dict(fixed)
        x.update(zip(var_names, combo))
        pe = psi_closed(p, x, opts, region=region) if closed else psi_open(p, x, region=region)
        rows.append(SweepRow(x=x, psi=pe.psi, z_star=pe.z_star, active_label=pe.active_label))
    return SweepResult(rows=tuple(rows))


# ----------------------------------------------------------------------
# Critical point (worst case) search
# ----------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class CriticalResult:
    """Worst-case search outcome: the maximizer of psi over the domain box.

    ``candidates`` lists every refined local optimum whose value lies within
    value_tolerance of the best, so problems with several global worst cases
    report all of them.
    """

    x_star: dict[str, float]
    psi_max: float
    candidates: tuple[tuple[dict[str, float], float], ...]
    evals: int
    converged: bool


def critical_search(p: Problem, opts: SolverOptions | None = None) -> CriticalResult:
    """Multistart maximization of psi over the uncertain-parameter box."""
    opts = opts or SolverOptions()
    region = build_region(p)
    closed = bool(p.controls)
    names = [v.name for v in p.uncertain]
    lo = np.array([v.lo for v in p.uncertain])
    hi = np.array([v.hi for v in p.uncertain])
    dim = len(names)
    counter = {"n": 0}
    converged = True

    def psi_point(xvec) -> float:
        xenv = dict(zip(names, (float(v) for v in np.asarray(xvec, dtype=float))))
        if closed:
            pe = psi_closed(p, xenv, opts, region=region)
            counter["n"] += pe.inner_evals
            return pe.psi
        counter["n"] += 1
        return -region.value_at(xenv)

    def psi_batch(arrays: dict[str, np.ndarray]) -> np.ndarray:
        n = len(next(iter(arrays.values())))
        if not closed:
            counter["n"] += n
            return -region.values_at(arrays)
        if len(p.controls) == 1:
            zvar = p.controls[0]
            fixed_expr = region.expr

            def inner(zarr):
                return -eval_arrays(fixed_expr, {**arrays, zvar.name: zarr})

            _, fbest, ev, _ = _min_1d_batch(inner, zvar.lo, zvar.hi, n, opts)
            counter["n"] += ev * n
            return fbest
        return np.array([psi_point([arrays[nm][i] for nm in names]) for i in range(n)])

    refined: list[tuple[np.ndarray, float]] = []
    g = max(3, opts.coarse_grid_per_dim)

    if dim == 1:
        xs = np.linspace(lo[0], hi[0], g)
        psis = psi_batch({names[0]: xs})
        for i in range(g):
            left = psis[i - 1] if i > 0 else -math.inf
            right = psis[i + 1] if i < g - 1 else -math.inf
            if psis[i] >= left and psis[i] >= right:
                blo = float(xs[max(i - 1, 0)])
                bhi = float(xs[min(i + 1, g - 1)])
                zb, fb, ev, conv = _min_1d_scalar(
                    lambda v: -psi_point([v]), blo, bhi, opts
                )
                converged = converged and conv
                refined.append((np.array([zb]), -fb))
    else:
        if not closed and dim == 2:
            axes = [np.linspace(lo[k], hi[k], g) for k in range(dim)]
            mesh = np.meshgrid(*axes, indexing="ij")
            arrays = {nm: m.ravel() for nm, m in zip(names, mesh)}
            psis = psi_batch(arrays)
            order = np.argsort(-psis, kind="stable")
            cell = (hi - lo) / (g - 1)
            starts: list[np.ndarray] = []
            for idx in order:
                pt = np.array([arrays[nm][idx] for nm in names])
                if all(np.max(np.abs(pt - s) / cell) >= 2.0 for s in starts):
                    starts.append(pt)
                if len(starts) >= opts.multistart_count:
                    break
        else:
            unit = _sobol_points(dim, opts.multistart_count, opts.seed)
            starts = [lo + u * (hi - lo) for u in unit]
            starts.append(0.5 * (lo + hi))
        for s in starts:
            res = _sciopt.minimize(
                lambda v: -psi_point(v),
                s,
                method="Nelder-Mead",
                bounds=list(zip(lo, hi)),
                options={"xatol": 1e-9, "fatol": opts.value_tolerance * 1e-2, "maxfev": 4000},
            )
            converged = converged and bool(res.success)
            refined.append((np.asarray(res.x, dtype=float), -float(res.fun)))

    refined.sort(key=lambda t: (-t[1], tuple(t[0])))
    best_x, best_psi = refined[0]
    scale = np.maximum(hi - lo, 1.0)
    candidates: list[tuple[dict[str, float], float]] = []
    for xv, psi in refined:
        if psi < best_psi - opts.value_tolerance:
            continue
        if any(
            np.max(np.abs(xv - np.array([c[nm] for nm in names])) / scale) < 1e-6
            for c, _ in candidates
        ):
            continue
        candidates.append((dict(zip(names, (float(t) for t in xv))), psi))
    return CriticalResult(
        x_star=dict(zip(names, (float(t) for t in best_x))),
        psi_max=best_psi,
        candidates=tuple(candidates),
        evals=counter["n"],
        converged=converged,
    )


# ----------------------------------------------------------------------
# Projected region: the uncertain-space region of a closed-loop problem
# ----------------------------------------------------------------------

class ProjectedRegion:
    """Region over the uncertain parameters of a problem with controls.

    value(x) = -psi(x): nonnegative exactly where some admissible control
    keeps every constraint satisfied.  Batch evaluation runs the inner
    minimization vectorized across samples (single-control problems), which
    is what makes Monte Carlo volume over the projected region practical.
    """

    def __init__(self, problem: Problem, opts: SolverOptions | None = None):
        if not problem.controls:
            raise NoControlVariablesError(problem.name)
        self.problem = problem
        self.opts = opts or SolverOptions()
        self.region = build_region(problem)
        self.domain = tuple((v.name, v.lo, v.hi) for v in problem.uncertain)
        self.problem_ref = problem.name

    @property
    def free_vars(self) -> tuple[str, ...]:
        return tuple(name for name, _, _ in self.domain)

    def value_at(self, point: Env) -> float:
        return -psi_closed(self.problem, point, self.opts, region=self.region).psi

    def values_at(self, arrays) -> np.ndarray:
        controls = self.problem.controls
        n = len(next(iter(arrays.values())))
        if len(controls) == 1:
            zvar = controls[0]

            def inner(zarr):
                return -eval_arrays(self.region.expr, {**arrays, zvar.name: zarr})

            _, fbest, _, _ = _min_1d_batch(inner, zvar.lo, zvar.hi, n, self.opts)
            return -fbest
        return np.array(
            [
                self.value_at({nm: float(arrays[nm][i]) for nm in self.free_vars})
                for i in range(n)
            ]
        )
