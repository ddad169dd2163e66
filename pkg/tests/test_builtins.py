"""Built-in problem integrity: transcription fixtures and round trips."""

import json
import os

import pytest

from rfeas.dsl import emit_problem, parse_problem
from rfeas.expr import eval_expr
from rfeas.problems import BUILTIN_SOURCES, builtin_names, builtin_source, get_builtin

FIXTURES = os.path.join(os.path.dirname(__file__), "data", "builtin_fixtures.json")


@pytest.fixture(scope="module")
def fixtures():
    with open(FIXTURES) as fh:
        return json.load(fh)


def test_nine_builtins():
    assert builtin_names() == (
        "ex1", "ex1-trimmed", "ex1-trimmed-prose",
        "ex2", "ex3", "ex4", "ex5", "ex6", "ex7",
    )


def test_all_builtins_parse():
    for name in builtin_names():
        p = get_builtin(name)
        assert p.constraints


def test_constraint_lines_byte_exact(fixtures):
    for name, source in BUILTIN_SOURCES.items():
        got = [ln for ln in source.splitlines() if ln.startswith("constraint ")]
        assert got == fixtures[name]["constraint_lines"], name


def test_pinned_point_values(fixtures):
    for name in builtin_names():
        p = get_builtin(name)
        design = p.design_values()
        pinned = fixtures[name]["pinned"]
        assert len(pinned) == 5
        for entry in pinned:
            env = {**design, **entry["point"]}
            for label, g in p.constraints:
                got = eval_expr(g, env)
                assert abs(got - entry["values"][label]) <= 1e-12, (name, label)


def test_hand_anchor_values():
    # independent hand computations, not derived from the evaluator
    p = get_builtin("ex2")
    vals = {l: eval_expr(g, {"theta1": 2.5, "theta2": 20.0}) for l, g in p.constraints}
    assert vals == {"f1": -16.25, "f2": -13.25, "f3": -20.0}
    p = get_builtin("ex6")
    env = {"theta": 1.8, "z": 2.2, "d": 1.0}
    assert all(abs(eval_expr(g, env) + 0.4) < 1e-12 for _, g in p.constraints)
    p = get_builtin("ex1")
    env = {"F_H1": 1.0, "Q_c": 15.0}
    assert [round(eval_expr(g, env), 9) for _, g in p.constraints] == [-7.5, -165.0, -5.0, -5.0]


def test_variable_roles_and_values():
    ex7 = get_builtin("ex7")
    assert ex7.design_values() == {"d1": 3.0, "d2": 1.0}
    assert [v.name for v in ex7.uncertain] == ["theta1", "theta2", "theta3"]
    assert [v.name for v in ex7.controls] == ["z"]
    ex5 = get_builtin("ex5")
    assert ex5.design_values() == {"d": 0.5}
    ex6 = get_builtin("ex6")
    assert ex6.design_values() == {"d": 1.0}


def test_trim_variants_differ_only_in_f5():
    trimmed = get_builtin("ex1-trimmed")
    prose = get_builtin("ex1-trimmed-prose")
    assert trimmed.labels() == prose.labels() == ("f1", "f2", "f3", "f4", "f5")
    # printed form keeps F_H1 >= 1.7; prose form keeps F_H1 <= 1.7
    g5t = dict(trimmed.constraints)["f5"]
    g5p = dict(prose.constraints)["f5"]
    assert eval_expr(g5t, {"F_H1": 1.75}) < 0 < eval_expr(g5p, {"F_H1": 1.75})
    assert eval_expr(g5p, {"F_H1": 1.6}) < 0 < eval_expr(g5t, {"F_H1": 1.6})


def test_emit_parse_roundtrip_semantics():
    for name in builtin_names():
        p = get_builtin(name)
        again = parse_problem(emit_problem(p))
        assert again == p


def test_builtin_source_unknown():
    with pytest.raises(KeyError):
        builtin_source("ex99")
