#!/usr/bin/env python3
"""Regenerate tests/data/builtin_fixtures.json.

The fixture freezes, for every built-in problem, the exact constraint lines
and the constraint values at five pinned points (all variables bound,
including designs).  Hand-computed anchor values are asserted here before
writing, so a transcription slip in the embedded problems fails loudly at
generation time rather than silently freezing bad numbers.
"""

import json
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from rfeas import rng
from rfeas.expr import eval_expr
from rfeas.problems import BUILTIN_SOURCES, get_builtin

# One hand-computed anchor point per problem: point -> expected g values.
HAND_ANCHORS = {
    "ex1": ({"F_H1": 1.0, "Q_c": 15.0}, [-7.5, -165.0, -5.0, -5.0]),
    "ex1-trimmed": ({"F_H1": 1.0, "Q_c": 15.0}, [-7.5, -165.0, -5.0, -5.0, 0.7]),
    "ex1-trimmed-prose": ({"F_H1": 1.0, "Q_c": 15.0}, [-7.5, -165.0, -5.0, -5.0, -0.7]),
    "ex2": ({"theta1": 2.5, "theta2": 20.0}, [-16.25, -13.25, -20.0]),
    "ex3": ({"theta1": 0.0, "theta2": 0.0}, [-15.0, -5.0, -80.0, 6.8]),
    "ex4": ({"theta1": 0.0, "theta2": 0.0}, [0.0, -3.0, -1.8]),
    "ex5": ({"theta": 1.5, "z": 1.5, "d": 0.5}, [0.0, 0.0]),
    "ex6": ({"theta": 1.8, "z": 2.2, "d": 1.0}, [-0.4, -0.4, -0.4]),
    "ex7": (
        {"theta1": 2.0, "theta2": 2.0, "theta3": 2.0, "z": 5.0 / 3.0, "d1": 3.0, "d2": 1.0},
        [-5.0 / 3.0, -4.0 / 3.0, -4.0 / 3.0],
    ),
}


def constraint_lines(source: str) -> list[str]:
    return [ln for ln in source.splitlines() if ln.startswith("constraint ")]


def random_points(problem, seed: int, count: int) -> list[dict]:
    # Bind every variable: declared box for params/controls, the fixed value
    # for designs (kept as a binding so fixtures exercise the raw g trees).
    boxed = [(v.name, v.lo, v.hi) for v in problem.variables if v.role != "design"]
    u = rng.uniforms(seed, 0, count * len(boxed)).reshape(count, len(boxed))
    points = []
    for i in range(count):
        pt = {name: lo + u[i, k] * (hi - lo) for k, (name, lo, hi) in enumerate(boxed)}
        pt.update(problem.design_values())
        points.append(pt)
    return points


def main():
    out = {}
    for idx, (name, source) in enumerate(BUILTIN_SOURCES.items()):
        problem = get_builtin(name)
        anchor_point, anchor_vals = HAND_ANCHORS[name]
        design = problem.design_values()
        full_anchor = {**design, **anchor_point}
        for (label, g), expected in zip(problem.constraints, anchor_vals):
            got = eval_expr(g, full_anchor)
            assert abs(got - expected) < 1e-12, (name, label, got, expected)
        points = [anchor_point] + random_points(problem, seed=1000 + idx, count=4)
        entries = []
        for pt in points:
            full = {**design, **pt}
            entries.append(
                {
                    "point": pt,
                    "values": {label: eval_expr(g, full) for label, g in problem.constraints},
                }
            )
        out[name] = {
            "constraint_lines": constraint_lines(source),
            "pinned": entries,
        }
    path = os.path.join(os.path.dirname(__file__), "..", "tests", "data", "builtin_fixtures.json")
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w") as fh:
        json.dump(out, fh, indent=1)
        fh.write("\n")
    print(f"wrote {os.path.normpath(path)}")


if __name__ == "__main__":
    main()
