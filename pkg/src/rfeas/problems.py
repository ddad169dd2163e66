"""Built-in benchmark problems.

Classic low-dimensional feasibility test cases from the process-design
literature, embedded as problem-file text so they round-trip through the
parser like user files:

    ex1                heat exchanger network, uncertain heat-capacity
                       flowrate F_H1, cooling load Q_c as the control
                       (Grossmann, Calfa & Garcia-Herreros 2014 variant of
                       Saboo & Morari 1984)
    ex1-trimmed        ex1 plus a trimming constraint 1.7 - F_H1 <= 0, which
                       restricts operation to F_H1 >= 1.7
    ex1-trimmed-prose  ex1 plus the opposite trim F_H1 <= 1.7, which removes
                       the sharp right-hand tip of the region
    ex2                three nonlinear convex constraints (Ierapetritou 2001)
    ex3                convex set plus a nonconvex constraint
                       (Banerjee & Ierapetritou 2005)
    ex4                six-hump-camel sublevel set with two linear cuts; the
                       feasible region is disjoint
                       (Boukouvala & Ierapetritou 2012)
    ex5                one control, one parameter, design d = 0.5
                       (Halemane & Grossmann 1983)
    ex6                ex5 plus a third constraint, design d = 1; two
                       worst-case parameter values
    ex7                three uncertain parameters, one control, design
                       (d1, d2) = (3, 1) (Ierapetritou 2001)
"""

from __future__ import annotations

from .dsl import Problem, parse_problem

_EX1_CORE = """\
problem {name}
# Heat exchanger network with uncertain heat-capacity flowrate.
param F_H1 in [1, 1.8]
# Q_c is physically nonnegative; 300 covers the feasible extreme near
# F_H1 = 1.8 (Q_c around 227) with margin.  Enclosure, not a constraint.
control Q_c in [0, 300]
constraint f1: -25 + Q_c*(1/F_H1 - 0.5) + 10/F_H1 <= 0
constraint f2: -190 + 10/F_H1 + Q_c/F_H1 <= 0
constraint f3: -270 + 250/F_H1 + Q_c/F_H1 <= 0
constraint f4: 260 - 250/F_H1 - Q_c/F_H1 <= 0
"""

BUILTIN_SOURCES: dict[str, str] = {
    "ex1": _EX1_CORE.format(name="ex1"),
    "ex1-trimmed": _EX1_CORE.format(name="ex1_trimmed")
    + "# Trimming constraint as printed: keeps F_H1 >= 1.7.\n"
    + "constraint f5: 1.7 - F_H1 <= 0\n",
    "ex1-trimmed-prose": _EX1_CORE.format(name="ex1_trimmed_prose")
    + "# Opposite-direction trim: removes the sharp tip by keeping F_H1 <= 1.7.\n"
    + "constraint f5: F_H1 - 1.7 <= 0\n",
    "ex2": """\
problem ex2
# Three nonlinear convex constraints.  The declared bounds are an enclosing
# sampling box, not part of the constraint set: the region spans roughly
# theta1 in [-4.36, 4.59] and theta2 in [-2.25, 38].
param theta1 in [-6, 6]
param theta2 in [-4, 42]
constraint f1: theta2 + theta1^2 - theta1 - 40 <= 0
constraint f2: theta1^2 + theta1 - theta2 - 2 <= 0
constraint f3: theta2 - 4*theta1 - 30 <= 0
""",
    "ex3": """\
problem ex3
# Convex constraints plus a nonconvex one (f4).
param theta1 in [-10, 10]
param theta2 in [-15, 15]
constraint f1: theta2 - 2*theta1 - 15 <= 0
constraint f2: theta2^2/2 + 4*theta1 - 5 - theta2 <= 0
constraint f3: theta2*(6 + theta1) - 80 <= 0
constraint f4: 10 - (theta1 - 4)^2/5 - 2*theta2^2 <= 0
""",
    "ex4": """\
problem ex4
# Six-hump-camel sublevel set with two linear cuts; disjoint feasible region.
param theta1 in [-2, 2]
param theta2 in [-1, 1]
constraint f1: 4*theta1^2 - 2.1*theta1^4 + theta1^6/3 + theta1*theta2 - 4*theta2^2 + 4*theta2^4 <= 0
constraint f2: 2*theta1 - theta2 - 3 <= 0
constraint f3: -0.8*theta1 + theta2 - 1.8 <= 0
""",
    "ex5": """\
problem ex5
param theta in [1, 2]
# z is unconstrained in the original formulation; [-20, 20] comfortably
# contains the optimal control (z* stays within [0.75, 5.25] over theta).
control z in [-20, 20]
design d = 0.5
constraint f1: -z + theta <= 0
constraint f2: z - 2*theta + 2 - d <= 0
""",
    "ex6": """\
problem ex6
param theta in [1, 2]
# z* stays within [-1, 3] over theta in [1, 2]; the box is a wide enclosure.
control z in [-20, 20]
design d = 1
constraint f1: -z + theta <= 0
constraint f2: z - 2*theta + 2 - d <= 0
constraint f3: -z + 6*theta - 9*d <= 0
""",
    "ex7": """\
problem ex7
param theta1 in [0, 4]
param theta2 in [0, 4]
param theta3 in [0, 4]
# The optimal control stays within roughly [-13, 22] over the parameter box.
control z in [-100, 100]
design d1 = 3
design d2 = 1
constraint f1: -z - theta1 + 0.5*theta2^2 + 2.0*theta3^2 + d1 - 3*d2 - 8 <= 0
constraint f2: -z - theta1/3 - theta2 - theta3/3 + d2 + 8/3 <= 0
constraint f3: z + theta1*theta1 - theta2 - d1 + theta3 - 4 <= 0
""",
}


def builtin_names() -> tuple[str, ...]:
    return tuple(BUILTIN_SOURCES)


def builtin_source(name: str) -> str:
    try:
        return BUILTIN_SOURCES[name]
    except KeyError:
        raise KeyError(
            f"unknown built-in problem '{name}' (available: {', '.join(BUILTIN_SOURCES)})"
        ) from None


_CACHE: dict[str, Problem] = {}


def get_builtin(name: str) -> Problem:
    if name not in _CACHE:
        _CACHE[name] = parse_problem(builtin_source(name))
    return _CACHE[name]
