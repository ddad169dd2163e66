"""Acceptance suite: one test per shipped criterion, at pinned tolerances.

Each test prints a single PASS/FAIL line (run with ``pytest -s`` to see them
live; they also appear in captured output).  Reference targets that the
as-shipped constraint sets cannot reproduce are asserted anyway and fail
loudly rather than being loosened; the analysis lives in the project notes
and in README.md ("Known discrepancies").
"""

import contextlib
import io
import json
import os
import time

import numpy as np

from oracles import brute_psi, ex5_psi, ex5_zstar, ex7_zstar_closed_form

from rfeas import rng
from rfeas.cli import main as cli_main
from rfeas.expr import eval_arrays, eval_expr, substitute
from rfeas.problems import builtin_names, get_builtin
from rfeas.region import boundary_2d, mc_volume
from rfeas.rfuncs import build_region, r_conj, r_disj
from rfeas.solver import ProjectedRegion, critical_search, psi_closed

README = os.path.join(os.path.dirname(__file__), "..", "README.md")


def report(criterion, ok: bool, detail: str, elapsed: float | None = None):
    stamp = "" if elapsed is None else f"  [{elapsed:.2f}s]"
    print(f"ACCEPTANCE {criterion:>3} {'PASS' if ok else 'FAIL'}: {detail}{stamp}")


def test_criterion_1_alpha_one_reduction():
    t0 = time.perf_counter()
    a, b = rng.uniform_pairs(101, 100000, -10.0, 10.0)
    worst = 0.0
    for ai, bi in zip(a, b):
        worst = max(
            worst,
            abs(r_conj(ai, bi, 1.0) - min(ai, bi)),
            abs(r_disj(ai, bi, 1.0) - max(ai, bi)),
        )
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 1.0
    report(1, ok, f"alpha=1 reduction, 1e5 pairs, worst |diff| = {worst:.3g}", elapsed)
    assert worst <= 1e-12
    assert elapsed < 1.0


def test_criterion_2_sign_equivalence_builtins():
    t0 = time.perf_counter()
    checked = 0
    for pi, name in enumerate(builtin_names()):
        base = get_builtin(name)
        for ai, alpha in enumerate((-0.5, 0.0, 0.5, 1.0)):
            p = base.with_alpha(alpha)
            r = build_region(p)
            names = [n for n, _, _ in r.domain]
            lo = np.array([b[1] for b in r.domain])
            hi = np.array([b[2] for b in r.domain])
            u = rng.uniforms(1000 * pi + ai, 0, 10000 * len(names))
            pts = lo + u.reshape(10000, len(names)) * (hi - lo)
            arrays = {n: pts[:, k] for k, n in enumerate(names)}
            rv = r.values_at(arrays)
            design = p.design_values()
            gmax = None
            for _, g in p.constraints:
                gv = eval_arrays(substitute(g, design), arrays)
                gmax = gv if gmax is None else np.maximum(gmax, gv)
            assert np.array_equal(rv >= 0.0, -gmax >= 0.0), (name, alpha)
            checked += 1
    elapsed = time.perf_counter() - t0
    ok = elapsed < 10.0
    report(2, ok, f"sign equivalence on {checked} (problem, alpha) combos x 1e4 points", elapsed)
    assert elapsed < 10.0


def test_criterion_3_de_morgan_and_symmetry_exact():
    a, b = rng.uniform_pairs(103, 100000, -10.0, 10.0)
    alphas = rng.uniforms(104, 0, 100000) * 1.999 - 0.999
    for i, (ai, bi, al) in enumerate(zip(a, b, alphas)):
        al = 1.0 if i % 10 == 0 else al
        assert r_disj(ai, bi, al) == -r_conj(-ai, -bi, al)
        assert r_conj(ai, bi, al) == r_conj(bi, ai, al)
    report(3, True, "De Morgan duality and symmetry exact (==) on 1e5 pairs")


def test_criterion_4_example2_volume():
    t0 = time.perf_counter()
    r = build_region(get_builtin("ex2"))
    vols = [mc_volume(r, samples=1000000, seed=s).volume for s in range(1, 6)]
    mean = sum(vols) / len(vols)
    elapsed = time.perf_counter() - t0
    rel = abs(mean - 199.4) / 199.4
    ok = rel <= 0.01 and elapsed < 5.0
    report(4, ok, f"ex2 volume mean over 5 seeds = {mean:.2f} vs 199.4 ({100*rel:.2f}%)", elapsed)
    assert rel <= 0.01
    assert elapsed < 5.0


def test_criterion_5_example3_volume():
    t0 = time.perf_counter()
    r = build_region(get_builtin("ex3"))
    est = mc_volume(r, samples=4000000, seed=1)
    elapsed = time.perf_counter() - t0
    rel = abs(est.volume - 152.17) / 152.17
    ok = rel <= 0.015 and elapsed < 20.0
    report(
        5, ok,
        f"ex3 volume = {est.volume:.2f} vs reference 152.17 ({100*rel:.1f}%); "
        "the as-printed constraint set measures 83.58 (see README known discrepancies)",
        elapsed,
    )
    assert elapsed < 20.0
    assert rel <= 0.015, (
        f"ex3 Monte Carlo volume {est.volume:.2f} is {100*rel:.1f}% from the "
        "reference value 152.17; the printed constraint set's true area is "
        "83.58 +/- 0.05 (dense-grid scan), so the reference is not reproducible"
    )


def test_criterion_6_example4_volume_and_disjoint_boundary():
    t0 = time.perf_counter()
    r = build_region(get_builtin("ex4"))
    est = mc_volume(r, samples=4000000, seed=1)
    rel = abs(est.volume - 1.46) / 1.46
    # The camel lobes poke a hair past the declared theta2 box near
    # (-0.2, 1)/(0.2, -1), so the complete drawing needs an enclosing box for
    # the loops to close (same treatment as the ex2 sampling enclosure).
    enclosing = (("theta1", -2.0, 2.0), ("theta2", -1.05, 1.05))
    b = boundary_2d(r, box=enclosing, grid_n=512, tol=1e-8)
    closed_polys = [poly for poly, c in zip(b.polylines, b.closed) if c]
    disjoint = len(closed_polys) >= 2 and not (set(closed_polys[0]) & set(closed_polys[1]))
    elapsed = time.perf_counter() - t0
    ok = rel <= 0.03 and disjoint and elapsed < 30.0
    report(
        6, ok,
        f"ex4 volume = {est.volume:.4f} vs 1.46 ({100*rel:.2f}%); "
        f"{len(closed_polys)} disjoint closed polylines",
        elapsed,
    )
    assert rel <= 0.03
    assert disjoint
    assert elapsed < 30.0


def test_criterion_7_example5_closed_loop_analytic():
    t0 = time.perf_counter()
    p = get_builtin("ex5")
    region = build_region(p)
    worst_psi = worst_z = 0.0
    for i in range(101):
        theta = 1.0 + i / 100.0
        pe = psi_closed(p, {"theta": theta}, region=region)
        worst_psi = max(worst_psi, abs(pe.psi - ex5_psi(theta)))
        worst_z = max(worst_z, abs(pe.z_star["z"] - ex5_zstar(theta)))
    elapsed = time.perf_counter() - t0
    ok = worst_psi <= 1e-6 and worst_z <= 1e-6 and elapsed < 5.0
    report(
        7, ok,
        f"ex5 psi and z* vs closed forms at 101 points: max errors "
        f"{worst_psi:.2g} / {worst_z:.2g}",
        elapsed,
    )
    assert worst_psi <= 1e-6
    assert worst_z <= 1e-6
    assert elapsed < 5.0


def test_criterion_8_example6_oracle_and_kink():
    p = get_builtin("ex6")
    region = build_region(p)
    for theta, expect in ((1.0, 0.0), (2.0, 0.0), (1.8, -0.4)):
        got = psi_closed(p, {"theta": theta}, region=region).psi
        assert abs(got - expect) <= 1e-6
        assert abs(brute_psi(p, {"theta": theta}) - expect) <= 1e-6
    thetas = np.arange(1.0, 2.0 + 1e-12, 1e-3)
    psis = np.array([psi_closed(p, {"theta": float(t)}, region=region).psi for t in thetas])
    kink = float(thetas[int(np.argmin(psis))])
    d2 = psis[:-2] - 2 * psis[1:-1] + psis[2:]
    spikes = np.nonzero(np.abs(d2) > 1e-4)[0] + 1
    localized = abs(kink - 1.8) <= 1e-3 and all(abs(thetas[s] - 1.8) <= 2e-3 for s in spikes)
    with open(README) as fh:
        flagged = "theta/2 - 1/2 - |5*theta - 9|/2" in fh.read()
    ok = localized and flagged
    report(
        8, ok,
        f"ex6 psi(1)=0, psi(2)=0, psi(1.8)=-0.4 vs oracle; kink at {kink:.4f}; "
        f"closed-form discrepancy flagged in README: {flagged}",
    )
    assert localized
    assert flagged


def test_criterion_9_example1_band_and_critical():
    t0 = time.perf_counter()
    p = get_builtin("ex1")
    region = build_region(p)

    def chi(F: float) -> float:
        return psi_closed(p, {"F_H1": F}, region=region).psi

    def bisect(lo, hi):
        flo = chi(lo)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if (chi(mid) > 0) == (flo > 0):
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-10:
                break
        return 0.5 * (lo + hi)

    cr = critical_search(p)
    f_star = cr.x_star["F_H1"]
    left = bisect(1.0, f_star)
    right = bisect(f_star, 1.8)
    feas_ok = all(
        eval_expr(g, {"F_H1": F, "Q_c": Q}) <= 1e-9
        for F, Q in ((1.0, 15.0), (1.8, 227.0))
        for _, g in p.constraints
    )
    elapsed = time.perf_counter() - t0
    ok = (
        abs(left - 1.118) <= 0.01
        and abs(right - 1.65) <= 0.01
        and abs(f_star - 1.37) <= 0.02
        and feas_ok
        and elapsed < 30.0
    )
    report(
        9, ok,
        f"ex1 band [{left:.4f}, {right:.4f}] vs [1.118, 1.65]; F* = {f_star:.4f} "
        f"vs 1.37; extremes (1, 15), (1.8, 227) feasible: {feas_ok}",
        elapsed,
    )
    assert abs(left - 1.118) <= 0.01
    assert abs(right - 1.65) <= 0.01
    assert abs(f_star - 1.37) <= 0.02
    assert feas_ok
    assert elapsed < 30.0


def test_criterion_10a_example7_psi_at_nominal():
    p = get_builtin("ex7")
    pe = psi_closed(p, {"theta1": 2.0, "theta2": 2.0, "theta3": 2.0})
    err = abs(pe.psi - (-4.0 / 3.0))
    ok = err <= 1e-6
    report(
        "10a", ok,
        f"ex7 psi(2,2,2) = {pe.psi:.9f} vs -4/3 (|err| = {err:.2g}), z* = {pe.z_star['z']:.6f}",
    )
    assert err <= 1e-6


def test_criterion_10b_example7_zstar_closed_form():
    p = get_builtin("ex7")
    region = build_region(p)
    u = rng.uniforms(1007, 0, 150).reshape(50, 3)
    worst = 0.0
    mismatches = 0
    for row in u:
        t1, t2, t3 = (float(4.0 * v) for v in row)
        pe = psi_closed(p, {"theta1": t1, "theta2": t2, "theta3": t3}, region=region)
        err = abs(pe.z_star["z"] - ex7_zstar_closed_form(t1, t2, t3))
        worst = max(worst, err)
        mismatches += err > 1e-6
    ok = worst <= 1e-6
    report(
        "10b", ok,
        f"ex7 z* vs closed form at 50 random points: {mismatches} mismatches, "
        f"worst |dz| = {worst:.3g} (closed form is only the minimizer where the "
        "second constraint dominates the first; see README known discrepancies)",
    )
    assert worst <= 1e-6, (
        f"the closed-form control is not the minimizer at {mismatches}/50 sampled "
        "points (it balances constraints f2 and f3 and is valid only where "
        "f1 <= f2 there, about half of the parameter box)"
    )


def test_criterion_10c_example7_projected_volume():
    t0 = time.perf_counter()
    p = get_builtin("ex7")
    proj = ProjectedRegion(p)
    est = mc_volume(proj, samples=400000, seed=1, threads=4)
    elapsed = time.perf_counter() - t0
    rel = abs(est.volume - 23.83) / 23.83
    ok = rel <= 0.02 and elapsed < 600.0
    report(
        "10c", ok,
        f"ex7 projected volume = {est.volume:.3f} vs reference 23.83 ({100*rel:.1f}%); "
        "direct minimization measures 24.733 (see README known discrepancies)",
        elapsed,
    )
    assert elapsed < 600.0
    assert rel <= 0.02, (
        f"projected-region volume {est.volume:.3f} is {100*rel:.1f}% from the "
        "reference 23.83; the true volume under per-sample inner minimization "
        "is 24.733 +/- 0.01 (dense-grid scan), so the reference is not reproducible"
    )


def test_criterion_11_boundary_residuals():
    t0 = time.perf_counter()
    worst_overall = 0.0
    names = [n for n in builtin_names() if len(build_region(get_builtin(n)).domain) == 2]
    for name in names:
        r = build_region(get_builtin(name))
        b = boundary_2d(r, grid_n=512, tol=1e-8)
        worst = max(
            abs(r.value_at({b.x_name: x, b.y_name: y}))
            for poly in b.polylines
            for x, y in poly
        )
        worst_overall = max(worst_overall, worst)
    elapsed = time.perf_counter() - t0
    ok = worst_overall <= 1e-8 and elapsed < 30.0
    report(
        11, ok,
        f"boundary residual over {len(names)} 2-D built-ins at grid 512: "
        f"max |R| = {worst_overall:.2g}",
        elapsed,
    )
    assert worst_overall <= 1e-8
    assert elapsed < 30.0


def _run_cli(argv) -> tuple[int, str]:
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        code = cli_main(argv)
    return code, buf.getvalue()


def test_criterion_12_thread_count_determinism(tmp_path):
    cases = [
        ["eval", "--builtin", "ex7", "--point", "theta1=2,theta2=2,theta3=2", "--seed", "5"],
        ["volume", "--builtin", "ex4", "--samples", "200000", "--seed", "5"],
        ["volume", "--builtin", "ex6", "--samples", "4000", "--seed", "5"],
        ["bbox", "--builtin", "ex2", "--method", "mc", "--samples", "100000", "--seed", "5"],
        ["bbox", "--builtin", "ex2", "--method", "opt", "--seed", "5"],
        ["boundary", "--builtin", "ex4", "--grid", "128", "--seed", "5"],
        ["sweep", "--builtin", "ex5", "--var", "theta", "--range", "1:2:0.1", "--seed", "5"],
        ["critical", "--builtin", "ex6", "--seed", "5"],
        ["builtin", "--list"],
    ]
    for argv in cases:
        outs = []
        extra = [] if argv[0] == "builtin" else ["--threads"]
        for threads in ("1", "4"):
            cmd = argv + ["--json"] + (extra + [threads] if extra else [])
            code, out = _run_cli(cmd)
            assert code == 0, cmd
            json.loads(out)  # must be valid JSON
            outs.append(out)
        assert outs[0] == outs[1], argv
    # heatmap writes bytes; compare files produced under both thread counts
    paths = []
    for threads in ("1", "4"):
        path = tmp_path / f"h{threads}.ppm"
        code, _ = _run_cli(["heatmap", "--builtin", "ex2", "--grid", "64",
                            "--out", str(path), "--threads", threads, "--json"])
        assert code == 0
        paths.append(path)
    assert paths[0].read_bytes() == paths[1].read_bytes()
    report(12, True, "byte-identical --json (and pixmap bytes) across --threads {1,4}")
