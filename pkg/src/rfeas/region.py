"""Region exploration: classification, Monte Carlo volume, bounding boxes,
2-D boundary extraction, and scalar-field grids.

Every operation takes a region object, anything with ``free_vars``,
``value_at(env)`` and ``values_at(arrays)``: a RegionExpr for regions in the
full variable space, or a ProjectedRegion for the uncertain-space region of a
closed-loop problem.

Monte Carlo sampling is counter based: sample i draws its coordinates from
fixed positions of a (seed-keyed) random stream, so estimates are bit
identical no matter how the work is chunked or how many threads run it.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import optimize as _sciopt

from . import rng
from .expr import Env, ExprError

__all__ = [
    "Classification", "classify", "VolumeEstimate", "mc_volume",
    "BoundingBox", "mc_bbox", "opt_bbox", "Boundary2D", "boundary_2d",
    "GridField", "grid_field", "NoFeasibleSamplesError", "NoConvergenceError",
    "DimensionMismatchError", "SampleEvalError", "box_of",
]

Box = tuple[tuple[str, float, float], ...]

_CHUNK = 1 << 16


class Classification(Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    BOUNDARY = "boundary"


class NoFeasibleSamplesError(Exception):
    pass


class NoConvergenceError(Exception):
    def __init__(self, direction):
        super().__init__(f"no start satisfied the boundary residual along direction {direction}")
        self.direction = tuple(direction)


class DimensionMismatchError(Exception):
    pass


class SampleEvalError(Exception):
    """Evaluation failed at a sampled point; carries the exact point."""

    def __init__(self, point: dict[str, float], index: int, cause: Exception):
        super().__init__(f"evaluation failed at sample {index}: {point} ({cause})")
        self.point = point
        self.index = index
        self.cause = cause


def box_of(region, names: list[str] | None = None) -> Box:
    """The region's declared domain box (optionally reordered/subset)."""
    domain = {name: (lo, hi) for name, lo, hi in region.domain}
    if names is None:
        return tuple(region.domain)
    return tuple((n, *domain[n]) for n in names)


def classify(region, point: Env, tol: float = 1e-9) -> Classification:
    """Feasible, infeasible, or boundary (|R| <= tol) at a point."""
    if tol < 0:
        raise ValueError("tol must be >= 0")
    v = region.value_at(point)
    if abs(v) <= tol:
        return Classification.BOUNDARY
    return Classification.FEASIBLE if v > 0 else Classification.INFEASIBLE


# ----------------------------------------------------------------------
# Monte Carlo sampling
# ----------------------------------------------------------------------

def _box_volume(box: Box) -> float:
    vol = 1.0
    for _, lo, hi in box:
        vol *= hi - lo
    return vol


def _chunk_points(box: Box, seed: int, start: int, count: int) -> dict[str, np.ndarray]:
    d = len(box)
    u = rng.uniforms(seed, start * d, count * d).reshape(count, d)
    return {name: lo + u[:, k] * (hi - lo) for k, (name, lo, hi) in enumerate(box)}


def _mc_scan(region, box: Box, samples: int, seed: int, threads: int | None, reducer):
    """Run ``reducer(start, points, values)`` over fixed-size sample chunks.

    Chunk boundaries do not depend on the thread count, and per-chunk results
    are combined in chunk order, so the outcome is thread-count independent.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    n_chunks = (samples + _CHUNK - 1) // _CHUNK

    def run(ci: int):
        start = ci * _CHUNK
        count = min(_CHUNK, samples - start)
        points = _chunk_points(box, seed, start, count)
        try:
            values = region.values_at(points)
        except ExprError as exc:
            idx = getattr(exc, "sample_index", 0)
            raise SampleEvalError(
                {name: float(arr[idx]) for name, arr in points.items()},
                start + idx,
                exc,
            ) from exc
        return reducer(start, points, values)

    if threads and threads > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, range(n_chunks)))
    return [run(ci) for ci in range(n_chunks)]


@dataclass(frozen=True, slots=True)
class VolumeEstimate:
    """Hit-or-miss volume estimate with its sampling provenance."""

    volume: float
    std_error: float
    samples: int
    hits: int
    seed: int
    sampling_box: Box


def mc_volume(region, box: Box | None = None, samples: int = 100000, seed: int = 0,
              threads: int | None = None) -> VolumeEstimate:
    """Monte Carlo volume of {x : R(x) >= 0} inside ``box``."""
    box = box or box_of(region)
    results = _mc_scan(
        region, box, samples, seed, threads,
        lambda start, pts, vals: int(np.count_nonzero(vals >= 0.0)),
    )
    hits = sum(results)
    box_vol = _box_volume(box)
    p = hits / samples
    return VolumeEstimate(
        volume=(hits / samples) * box_vol,
        std_error=box_vol * math.sqrt(p * (1.0 - p) / samples),
        samples=samples,
        hits=hits,
        seed=seed,
        sampling_box=box,
    )


@dataclass(frozen=True, slots=True)
class BoundingBox:
    """Axis-aligned bounds per dimension, with the effort that produced them.

    ``method`` is "mc" (bounds of the feasible samples, an inner
    approximation) or "opt" (penalized boundary optimization).  ``effort``
    counts samples for mc and objective evaluations for opt.
    """

    dims: Box
    method: str
    effort: int
    seed: int


def mc_bbox(region, box: Box | None = None, samples: int = 100000, seed: int = 0,
            threads: int | None = None) -> BoundingBox:
    """Bounds of the feasible Monte Carlo samples (inner approximation)."""
    box = box or box_of(region)
    names = [name for name, _, _ in box]

    def reduce_chunk(start, pts, vals):
        mask = vals >= 0.0
        if not mask.any():
            return None
        return (
            [float(pts[n][mask].min()) for n in names],
            [float(pts[n][mask].max()) for n in names],
        )

    results = [r for r in _mc_scan(region, box, samples, seed, threads, reduce_chunk) if r]
    if not results:
        raise NoFeasibleSamplesError(
            f"no feasible point among {samples} samples in {box}"
        )
    los = np.min([r[0] for r in results], axis=0)
    his = np.max([r[1] for r in results], axis=0)
    dims = tuple((n, float(lo), float(hi)) for n, lo, hi in zip(names, los, his))
    return BoundingBox(dims=dims, method="mc", effort=samples, seed=seed)


def opt_bbox(region, box: Box | None = None, directions: list | None = None,
             starts_per_direction: int = 8, seed: int = 0) -> BoundingBox:
    """Bounding box by minimizing a^T x over the boundary R(x) = 0.

    Each direction is handled by penalty continuation, minimizing
    a^T x + mu R(x)^2 for mu in {1e0, 1e2, 1e4, 1e6} with Nelder-Mead at each
    stage, from starts drawn among the extreme feasible Monte Carlo samples.
    A start only counts if its final boundary residual |R| <= 1e-6.
    """
    box = box or box_of(region)
    names = [name for name, _, _ in box]
    dim = len(names)
    lo = np.array([b[1] for b in box])
    hi = np.array([b[2] for b in box])
    if directions is None:
        directions = []
        for k in range(dim):
            e = np.zeros(dim)
            e[k] = 1.0
            directions.append(e.copy())
            directions.append(-e)
    directions = [np.asarray(d, dtype=float) for d in directions]
    for k in range(dim):
        axis = [d for d in directions if abs(abs(d[k]) - 1.0) < 1e-12 and np.count_nonzero(d) == 1]
        if len({1.0 if d[k] > 0 else -1.0 for d in axis}) != 2:
            raise ValueError("directions must include +e_k and -e_k for every dimension")

    # Feasible seed points from a deterministic MC pass.
    probe = _chunk_points(box, seed, 0, 32768)
    vals = region.values_at(probe)
    feas_mask = vals >= 0.0
    feas = np.column_stack([probe[n] for n in names])[feas_mask]
    counter = {"n": int(32768)}

    def objective_factory(alpha, mu):
        def f(x):
            counter["n"] += 1
            r = region.value_at(dict(zip(names, (float(v) for v in x))))
            return float(alpha @ x) + mu * r * r
        return f

    # Allow iterates slightly outside the sampling box so boundaries on the
    # box edge stay reachable.
    margin = 0.05 * (hi - lo)
    nm_bounds = list(zip(lo - margin, hi + margin))

    def value(x) -> float:
        counter["n"] += 1
        return region.value_at(dict(zip(names, (float(v) for v in x))))

    def project(x, alpha):
        # The penalty equilibrium leaves the iterate a little off the
        # boundary; finish with a bisection along the search direction.
        r0 = value(x)
        if r0 == 0.0:
            return x
        step = 1e-6 * float(np.linalg.norm(hi - lo))
        walk = alpha if r0 < 0.0 else -alpha  # +alpha walks back inside
        t = step
        inner, outer = None, x
        for _ in range(40):
            cand = x + t * walk
            if (value(cand) >= 0.0) != (r0 >= 0.0):
                inner = cand
                break
            outer = cand
            t *= 2.0
        if inner is None:
            return x
        a, b = outer, inner
        for _ in range(80):
            mid = 0.5 * (a + b)
            if (value(mid) >= 0.0) == (r0 >= 0.0):
                a = mid
            else:
                b = mid
        return b if r0 < 0.0 else a  # the feasible side of the crossing

    support: list[np.ndarray] = []
    for alpha in directions:
        if len(feas):
            order = np.argsort(feas @ alpha, kind="stable")
            starts = [feas[i] for i in order[:starts_per_direction]]
        else:
            unit = rng.uniforms(seed ^ 0x5EED, 0, starts_per_direction * dim)
            starts = [lo + u * (hi - lo) for u in unit.reshape(-1, dim)]
        best_val = math.inf
        best_x = None
        for s in starts:
            x = np.asarray(s, dtype=float)
            for mu in (1e0, 1e2, 1e4, 1e6):
                res = _sciopt.minimize(
                    objective_factory(alpha, mu), x, method="Nelder-Mead",
                    bounds=nm_bounds,
                    options={"xatol": 1e-10, "fatol": 1e-12, "maxfev": 600 * dim},
                )
                x = np.asarray(res.x, dtype=float)
            x = project(x, alpha)
            residual = value(x)
            if abs(residual) <= 1e-6 and float(alpha @ x) < best_val:
                best_val = float(alpha @ x)
                best_x = x
        if best_x is None:
            raise NoConvergenceError(alpha)
        support.append(best_x)

    pts = np.array(support)
    dims = tuple(
        (n, float(pts[:, k].min()), float(pts[:, k].max())) for k, n in enumerate(names)
    )
    return BoundingBox(dims=dims, method="opt", effort=counter["n"], seed=seed)


# ----------------------------------------------------------------------
# 2-D boundary extraction (marching squares + bisection refinement)
# ----------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class Boundary2D:
    """Zero level set of a 2-D region as chained polylines.

    Vertices satisfy |R| <= tol; consecutive vertices come from adjacent
    grid cells.  ``closed`` flags loops (endpoints meet within a cell
    diagonal).
    """

    polylines: tuple[tuple[tuple[float, float], ...], ...]
    closed: tuple[bool, ...]
    grid_n: int
    tol: float
    x_name: str
    y_name: str


# Marching-squares case table.  Corner bit order: BL=1, BR=2, TR=4, TL=8,
# bit set when the corner value is >= 0.  Entries are edge pairs among
# B(ottom), R(ight), T(op), L(eft).  Cases 5 and 10 are saddles, resolved by
# the sign at the cell center.
_MS_CASES: dict[int, list[tuple[str, str]]] = {
    0: [], 15: [],
    1: [("L", "B")], 14: [("L", "B")],
    2: [("B", "R")], 13: [("B", "R")],
    4: [("R", "T")], 11: [("R", "T")],
    8: [("T", "L")], 7: [("T", "L")],
    3: [("L", "R")], 12: [("L", "R")],
    6: [("B", "T")], 9: [("B", "T")],
}
_MS_SADDLE = {
    (5, True): [("B", "R"), ("T", "L")],
    (5, False): [("L", "B"), ("R", "T")],
    (10, True): [("L", "B"), ("R", "T")],
    (10, False): [("B", "R"), ("T", "L")],
}


def _cell_centers(lo: float, hi: float, n: int) -> np.ndarray:
    w = (hi - lo) / n
    return lo + (np.arange(n) + 0.5) * w


def boundary_2d(region, box: Box | None = None, grid_n: int = 256, tol: float = 1e-8) -> Boundary2D:
    """Extract the R = 0 contour over a 2-D box.

    Marching squares on a grid_n x grid_n lattice of cell centers; each
    crossing edge is refined by bisection until |R| <= tol (60 iterations
    cap); segments are chained into polylines.
    """
    box = box or box_of(region)
    if len(box) != 2:
        raise DimensionMismatchError(
            f"boundary_2d needs exactly 2 free variables, region has {len(box)}"
        )
    if grid_n < 16:
        raise ValueError("grid_n must be >= 16")
    (xn, xlo, xhi), (yn, ylo, yhi) = box
    xs = _cell_centers(xlo, xhi, grid_n)
    ys = _cell_centers(ylo, yhi, grid_n)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    vals = region.values_at({xn: gx.ravel(), yn: gy.ravel()}).reshape(grid_n, grid_n)
    sign = vals >= 0.0

    # Crossing edges.  Horizontal edge (i, j): nodes (i, j)-(i+1, j); vertical
    # edge (i, j): nodes (i, j)-(i, j+1).
    h_cross = sign[:-1, :] != sign[1:, :]
    v_cross = sign[:, :-1] != sign[:, 1:]

    edge_ids: list[tuple[str, int, int]] = []
    p0s, p1s, f0s, f1s = [], [], [], []
    for i, j in zip(*np.nonzero(h_cross)):
        edge_ids.append(("h", int(i), int(j)))
        p0s.append((xs[i], ys[j]))
        p1s.append((xs[i + 1], ys[j]))
        f0s.append(vals[i, j])
        f1s.append(vals[i + 1, j])
    for i, j in zip(*np.nonzero(v_cross)):
        edge_ids.append(("v", int(i), int(j)))
        p0s.append((xs[i], ys[j]))
        p1s.append((xs[i], ys[j + 1]))
        f0s.append(vals[i, j])
        f1s.append(vals[i, j + 1])

    vertex = dict(
        zip(edge_ids, _refine_edges(region, xn, yn, p0s, p1s, f0s, f1s, tol))
    ) if edge_ids else {}

    # Saddle cells need the center sign.
    cases = (
        sign[:-1, :-1].astype(np.int8)
        + 2 * sign[1:, :-1]
        + 4 * sign[1:, 1:]
        + 8 * sign[:-1, 1:]
    )
    saddles = np.nonzero((cases == 5) | (cases == 10))
    saddle_sign: dict[tuple[int, int], bool] = {}
    if len(saddles[0]):
        cxs = xs[saddles[0]] + 0.5 * (xhi - xlo) / grid_n
        cys = ys[saddles[1]] + 0.5 * (yhi - ylo) / grid_n
        centers = region.values_at({xn: cxs, yn: cys})
        for (i, j), cv in zip(zip(*saddles), centers):
            saddle_sign[(int(i), int(j))] = bool(cv >= 0.0)

    segments: list[tuple[tuple, tuple]] = []
    for i, j in zip(*np.nonzero((cases != 0) & (cases != 15))):
        i, j = int(i), int(j)
        case = int(cases[i, j])
        pairs = _MS_SADDLE[(case, saddle_sign[(i, j)])] if case in (5, 10) else _MS_CASES[case]
        cell_edges = {
            "B": ("h", i, j), "T": ("h", i, j + 1),
            "L": ("v", i, j), "R": ("v", i + 1, j),
        }
        for a, b in pairs:
            segments.append((cell_edges[a], cell_edges[b]))

    polylines, closed = _chain_segments(segments, vertex)
    cell_diag = math.hypot((xhi - xlo) / grid_n, (yhi - ylo) / grid_n)
    closed = tuple(
        c or (len(poly) > 2 and math.dist(poly[0], poly[-1]) <= cell_diag)
        for c, poly in zip(closed, polylines)
    )
    return Boundary2D(
        polylines=tuple(tuple(poly) for poly in polylines),
        closed=closed,
        grid_n=grid_n,
        tol=tol,
        x_name=xn,
        y_name=yn,
    )


def _refine_edges(region, xn, yn, p0s, p1s, f0s, f1s, tol, max_iter: int = 60):
    """Bisect every crossing edge in lockstep until |R| <= tol at each vertex."""
    px = np.array([p[0] for p in p0s])
    py = np.array([p[1] for p in p0s])
    qx = np.array([p[0] for p in p1s])
    qy = np.array([p[1] for p in p1s])
    f0 = np.array(f0s)
    # Orient brackets: (px, py) holds the >= 0 end.
    swap = f0 < 0.0
    px, qx = np.where(swap, qx, px), np.where(swap, px, qx)
    py, qy = np.where(swap, qy, py), np.where(swap, py, qy)
    best_x, best_y = px.copy(), py.copy()
    best_f = np.abs(np.where(swap, np.array(f1s), f0))
    for _ in range(max_iter):
        if best_f.size and float(best_f.max()) <= tol:
            break
        mx = 0.5 * (px + qx)
        my = 0.5 * (py + qy)
        fm = region.values_at({xn: mx, yn: my})
        better = np.abs(fm) < best_f
        best_x = np.where(better, mx, best_x)
        best_y = np.where(better, my, best_y)
        best_f = np.where(better, np.abs(fm), best_f)
        pos = fm >= 0.0
        px = np.where(pos, mx, px)
        py = np.where(pos, my, py)
        qx = np.where(pos, qx, mx)
        qy = np.where(pos, qy, my)
    return [(float(x), float(y)) for x, y in zip(best_x, best_y)]


def _chain_segments(segments, vertex):
    """Join segments sharing a crossing edge into polylines (deterministic).

    Every crossing edge joins at most two segments, so components are simple
    paths or cycles: open chains are walked from their degree-1 endpoints
    first, whatever remains is a cycle.  Closed chains repeat their first
    vertex at the end.
    """
    adjacency: dict[tuple, list[tuple[int, tuple]]] = {}
    for si, (a, b) in enumerate(segments):
        adjacency.setdefault(a, []).append((si, b))
        adjacency.setdefault(b, []).append((si, a))
    used = [False] * len(segments)
    polylines: list[list[tuple[float, float]]] = []
    closed_flags: list[bool] = []

    def walk_from(start):
        chain = [start]
        cur = start
        while True:
            step = next(((si, other) for si, other in adjacency[cur] if not used[si]), None)
            if step is None:
                return chain
            si, other = step
            used[si] = True
            chain.append(other)
            cur = other

    for endpoint, incident in adjacency.items():
        if len(incident) != 1 or used[incident[0][0]]:
            continue
        chain = walk_from(endpoint)
        polylines.append([vertex[e] for e in chain])
        closed_flags.append(False)
    for si in range(len(segments)):
        if used[si]:
            continue
        chain = walk_from(segments[si][0])
        polylines.append([vertex[e] for e in chain])
        closed_flags.append(chain[0] == chain[-1])
    return polylines, closed_flags


# ----------------------------------------------------------------------
# Scalar-field grid (heatmap data)
# ----------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class GridField:
    """Region values at the centers of an nx x ny cell grid.

    ``values[iy, ix]`` is row-major with iy = 0 at the *low* end of the y
    range; writers that want image order flip it.
    """

    x_name: str
    y_name: str
    nx: int
    ny: int
    values: np.ndarray
    x_range: tuple[float, float]
    y_range: tuple[float, float]


def grid_field(region, box: Box | None = None, nx: int = 256, ny: int = 256) -> GridField:
    box = box or box_of(region)
    if len(box) != 2:
        raise DimensionMismatchError(
            f"grid_field needs exactly 2 free variables, region has {len(box)}"
        )
    if nx < 2 or ny < 2:
        raise ValueError("nx and ny must be >= 2")
    (xn, xlo, xhi), (yn, ylo, yhi) = box
    xs = _cell_centers(xlo, xhi, nx)
    ys = _cell_centers(ylo, yhi, ny)
    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    try:
        vals = region.values_at({xn: gx.ravel(), yn: gy.ravel()})
    except ExprError as exc:
        idx = getattr(exc, "sample_index", 0)
        iy, ix = divmod(int(idx), nx)
        raise SampleEvalError({xn: float(gx[iy, ix]), yn: float(gy[iy, ix])}, idx, exc) from exc
    return GridField(
        x_name=xn, y_name=yn, nx=nx, ny=ny,
        values=vals.reshape(ny, nx),
        x_range=(xlo, xhi), y_range=(ylo, yhi),
    )
