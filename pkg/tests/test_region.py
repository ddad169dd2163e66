"""Region exploration: classification, Monte Carlo, boxes, boundaries, grids."""

import math

import numpy as np
import pytest

from rfeas.dsl import parse_problem
from rfeas.problems import get_builtin
from rfeas.region import (
    Classification,
    DimensionMismatchError,
    NoFeasibleSamplesError,
    SampleEvalError,
    boundary_2d,
    classify,
    grid_field,
    mc_bbox,
    mc_volume,
    opt_bbox,
)
from rfeas.rfuncs import build_region
from rfeas.solver import ProjectedRegion

UNIT_SQUARE = """problem unitsquare
param x in [-1, 2]
param y in [-1, 2]
constraint g1: -x <= 0
constraint g2: x - 1 <= 0
constraint g3: -y <= 0
constraint g4: y - 1 <= 0
"""

DISK = """problem disk
param x in [-2, 2]
param y in [-2, 2]
constraint c1: x^2 + y^2 - 1 <= 0
constraint c2: x - 10 <= 0
"""


@pytest.fixture(scope="module")
def square():
    return build_region(parse_problem(UNIT_SQUARE))


@pytest.fixture(scope="module")
def disk():
    return build_region(parse_problem(DISK))


# ----------------------------------------------------------------------
# classify
# ----------------------------------------------------------------------

def test_classify_ex2_nominal_feasible():
    r = build_region(get_builtin("ex2"))
    assert classify(r, {"theta1": 2.5, "theta2": 20.0}, tol=1e-9) is Classification.FEASIBLE
    assert classify(r, {"theta1": 10.0, "theta2": 0.0}, tol=1e-9) is Classification.INFEASIBLE


def test_classify_ex5_full_space_boundary():
    r = build_region(get_builtin("ex5"))
    assert classify(r, {"z": 1.5, "theta": 1.5}, tol=1e-9) is Classification.BOUNDARY


# ----------------------------------------------------------------------
# mc_volume
# ----------------------------------------------------------------------

def test_unit_square_volume(square):
    est = mc_volume(square, samples=200000, seed=7)
    assert abs(est.volume - 1.0) <= 3 * est.std_error
    assert est.hits <= est.samples
    assert est.volume == (est.hits / est.samples) * 9.0
    expected_se = 9.0 * math.sqrt((est.hits / est.samples) * (1 - est.hits / est.samples) / est.samples)
    assert est.std_error == pytest.approx(expected_se, rel=1e-12)


def test_mc_consistency_across_seeds(square):
    bad = 0
    for seed in range(100):
        est = mc_volume(square, samples=20000, seed=seed)
        if abs(est.volume - 1.0) > 4 * est.std_error:
            bad += 1
    assert bad <= 1  # >= 99% of seeds inside 4 standard errors


def test_mc_volume_deterministic_and_thread_independent(square):
    a = mc_volume(square, samples=300000, seed=3)
    b = mc_volume(square, samples=300000, seed=3, threads=4)
    assert a == b


def test_ex2_volume_close_to_true_area():
    # true area of the ex2 region (exact piecewise integral) is 200.357
    r = build_region(get_builtin("ex2"))
    est = mc_volume(r, samples=1000000, seed=1)
    assert est.volume == pytest.approx(200.357, rel=0.01)


def test_ring_volume_with_fractional_alpha():
    # annulus 1 <= x^2 + y^2 <= 4 composed with alpha = 0.5 (radical form):
    # sign semantics must survive the smooth blend; area is 3*pi
    p = parse_problem(
        "problem ring\nparam x in [-3, 3]\nparam y in [-3, 3]\nalpha 0.5\n"
        "constraint outer: x^2 + y^2 - 4 <= 0\n"
        "constraint inner: 1 - x^2 - y^2 <= 0\n"
    )
    est = mc_volume(build_region(p), samples=500000, seed=9)
    assert abs(est.volume - 3 * math.pi) <= 4 * est.std_error


def test_volume_monotone_under_added_constraint():
    base = ProjectedRegion(get_builtin("ex1"))
    for variant in ("ex1-trimmed", "ex1-trimmed-prose"):
        trimmed = ProjectedRegion(get_builtin(variant))
        v0 = mc_volume(base, samples=20000, seed=11)
        v1 = mc_volume(trimmed, box=v0.sampling_box, samples=20000, seed=11)
        assert v1.volume <= v0.volume


def test_volume_error_reports_sample_point():
    p = parse_problem("param x in [-1, 1]\nconstraint g: 1/x - 2 <= 0\n")
    r = build_region(p)
    with pytest.raises(SampleEvalError) as exc:
        # a tiny |x| below the division guard is unlikely; force it with a
        # box that degenerates to ~0 width around zero
        mc_volume(r, box=(("x", -1e-301, 1e-301),), samples=64, seed=0)
    assert "x" in exc.value.point


# ----------------------------------------------------------------------
# bounding boxes
# ----------------------------------------------------------------------

def test_mc_bbox_unit_square(square):
    bb = mc_bbox(square, samples=1000000, seed=5)
    for name, lo, hi in bb.dims:
        assert lo == pytest.approx(0.0, abs=0.01)
        assert hi == pytest.approx(1.0, abs=0.01)
        assert lo >= 0.0 and hi <= 1.0  # inner approximation


def test_mc_bbox_disk(disk):
    bb = mc_bbox(disk, samples=1000000, seed=5)
    for name, lo, hi in bb.dims:
        assert lo == pytest.approx(-1.0, abs=0.01)
        assert hi == pytest.approx(1.0, abs=0.01)


def test_mc_bbox_ex4_two_sided():
    r = build_region(get_builtin("ex4"))
    bb = mc_bbox(r, samples=200000, seed=2)
    (t1, lo1, hi1), (t2, lo2, hi2) = bb.dims
    assert lo2 < -0.5 and hi2 > 0.5  # both camel lobes sampled (two-sided)
    assert lo2 > -1.0 and hi2 < 1.0  # inner approximation stays inside the box
    assert lo1 < 0 < hi1


def test_mc_bbox_no_feasible_samples():
    p = parse_problem("param x in [0, 1]\nconstraint g: x + 10 <= 0\n")
    with pytest.raises(NoFeasibleSamplesError):
        mc_bbox(build_region(p), samples=1000, seed=0)


def test_opt_bbox_disk_directions(disk):
    bb = opt_bbox(disk, seed=0)
    for name, lo, hi in bb.dims:
        assert lo == pytest.approx(-1.0, abs=1e-4)
        assert hi == pytest.approx(1.0, abs=1e-4)
    assert bb.method == "opt"


def test_opt_bbox_ex2_upper_theta2():
    r = build_region(get_builtin("ex2"))
    bb = opt_bbox(r, seed=0)
    dims = dict((n, (lo, hi)) for n, lo, hi in bb.dims)
    # upper parabola capped by the line at theta1 = 2 gives max theta2 = 38
    assert dims["theta2"][1] == pytest.approx(38.0, abs=0.1)


def test_mc_box_inside_opt_box(disk):
    mc = mc_bbox(disk, samples=200000, seed=1)
    opt = opt_bbox(disk, seed=1)
    for (n1, mlo, mhi), (n2, olo, ohi) in zip(mc.dims, opt.dims):
        assert mlo >= olo - 1e-3
        assert mhi <= ohi + 1e-3


def test_opt_bbox_requires_axis_directions(disk):
    with pytest.raises(ValueError):
        opt_bbox(disk, directions=[np.array([1.0, 0.0]), np.array([-1.0, 0.0])])


def test_opt_bbox_no_convergence_on_empty_region():
    from rfeas.region import NoConvergenceError

    p = parse_problem("param x in [0, 1]\nconstraint g: x + 10 <= 0\n")
    with pytest.raises(NoConvergenceError) as exc:
        opt_bbox(build_region(p), seed=0)
    assert len(exc.value.direction) == 1


# ----------------------------------------------------------------------
# boundary_2d
# ----------------------------------------------------------------------

def test_boundary_disk_single_closed_loop(disk):
    b = boundary_2d(disk, grid_n=256, tol=1e-10)
    assert len(b.polylines) == 1
    assert b.closed == (True,)
    residual = max(abs(x * x + y * y - 1.0) for x, y in b.polylines[0])
    assert residual <= 2e-10


def test_boundary_ex4_disjoint():
    r = build_region(get_builtin("ex4"))
    b = boundary_2d(r, grid_n=512, tol=1e-8)
    assert len(b.polylines) >= 2
    # over a box enclosing the full drawing, the components close up
    enclosing = (("theta1", -2.0, 2.0), ("theta2", -1.05, 1.05))
    b2 = boundary_2d(r, box=enclosing, grid_n=512, tol=1e-8)
    assert sum(b2.closed) >= 2


def test_boundary_ex2_interior_confirms_enclosure():
    # the declared ex2 box is a sampling enclosure: the whole zero contour
    # must sit strictly inside it (closed loops, no box-edge exits)
    r = build_region(get_builtin("ex2"))
    b = boundary_2d(r, grid_n=256, tol=1e-8)
    assert all(b.closed)
    xs = [x for poly in b.polylines for x, _ in poly]
    ys = [y for poly in b.polylines for _, y in poly]
    assert -6 < min(xs) and max(xs) < 6
    assert -4 < min(ys) and max(ys) < 42


def test_boundary_ex1_band_components():
    r = build_region(get_builtin("ex1"))
    b = boundary_2d(r, grid_n=512, tol=1e-8)
    assert len(b.polylines) >= 2
    f_values = [x for poly in b.polylines for x, _ in poly]
    assert any(abs(f - 1.118) < 0.01 for f in f_values)
    assert any(abs(f - 1.65) < 0.01 for f in f_values)


def test_boundary_vertex_residuals_all_2d_builtins():
    for name in ("ex1", "ex2", "ex3", "ex4", "ex5", "ex6"):
        r = build_region(get_builtin(name))
        b = boundary_2d(r, grid_n=128, tol=1e-8)
        worst = max(
            abs(r.value_at({b.x_name: x, b.y_name: y}))
            for poly in b.polylines
            for x, y in poly
        )
        assert worst <= 1e-8, name


def test_boundary_requires_two_dims():
    with pytest.raises(DimensionMismatchError):
        boundary_2d(build_region(get_builtin("ex7")), grid_n=64)


def test_boundary_consecutive_vertices_adjacent(disk):
    b = boundary_2d(disk, grid_n=128, tol=1e-9)
    cell = 4.0 / 128
    for poly in b.polylines:
        for (x0, y0), (x1, y1) in zip(poly, poly[1:]):
            assert abs(x1 - x0) <= cell + 1e-12
            assert abs(y1 - y0) <= cell + 1e-12


# ----------------------------------------------------------------------
# grid_field
# ----------------------------------------------------------------------

@pytest.mark.filterwarnings("ignore::rfeas.dsl.UnreferencedVariableWarning")
def test_grid_field_constant_region():
    p = parse_problem("param x in [0, 1]\nparam y in [0, 1]\nconstraint g: 0 - 1 <= 0\n")
    f = grid_field(build_region(p), nx=4, ny=3)
    assert f.values.shape == (3, 4)
    assert np.all(f.values == 1.0)


def test_grid_field_disk_sign_pattern(disk):
    f = grid_field(disk, nx=3, ny=3)
    assert f.values[1, 1] > 0
    for iy, ix in ((0, 0), (0, 2), (2, 0), (2, 2)):
        assert f.values[iy, ix] < 0


def test_grid_field_ex2_nominal_cell_positive():
    r = build_region(get_builtin("ex2"))
    f = grid_field(r, nx=256, ny=256)
    ix = int((2.5 - (-6.0)) / 12.0 * 256)
    iy = int((20.0 - (-4.0)) / 46.0 * 256)
    assert f.values[iy, ix] > 0


def test_grid_field_boundary_coherence(disk):
    # every sign change between adjacent field cells carries a boundary vertex
    # on the edge joining the two cell centers (same lattice, same n)
    n = 64
    f = grid_field(disk, nx=n, ny=n)
    b = boundary_2d(disk, grid_n=n, tol=1e-9)
    xs = f.x_range[0] + (np.arange(n) + 0.5) * (f.x_range[1] - f.x_range[0]) / n
    ys = f.y_range[0] + (np.arange(n) + 0.5) * (f.y_range[1] - f.y_range[0]) / n
    verts = [v for poly in b.polylines for v in poly]
    sign = f.values >= 0
    eps = 1e-12
    for iy, ix in zip(*np.nonzero(sign[:, :-1] != sign[:, 1:])):
        assert any(
            abs(vy - ys[iy]) <= eps and xs[ix] - eps <= vx <= xs[ix + 1] + eps
            for vx, vy in verts
        ), ("horizontal", ix, iy)
    for iy, ix in zip(*np.nonzero(sign[:-1, :] != sign[1:, :])):
        assert any(
            abs(vx - xs[ix]) <= eps and ys[iy] - eps <= vy <= ys[iy + 1] + eps
            for vx, vy in verts
        ), ("vertical", ix, iy)


def test_grid_field_dimension_check():
    with pytest.raises(DimensionMismatchError):
        grid_field(build_region(get_builtin("ex7")), nx=8, ny=8)
