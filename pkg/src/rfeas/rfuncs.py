"""R-function combinators and implicit region construction.

An R-function is a real-valued function whose sign is determined entirely by
the signs of its arguments.  The alpha family used here is

    conj(a, b) = (a + b - sqrt(a^2 + b^2 - 2*alpha*a*b)) / (1 + alpha)
    disj(a, b) = (a + b + sqrt(a^2 + b^2 - 2*alpha*a*b)) / (1 + alpha)

with -1 < alpha <= 1.  At alpha = 1 these reduce exactly to min and max, and
the symbolic form switches to the equivalent ((a + b) - |a - b|) / 2, which
avoids taking sqrt of a perfectly squared quantity (that form loses half the
significant digits near a == b).

A problem's constraints g_j <= 0 are flipped to phi_j = -g_j >= 0 and folded
left to right with the conjunction; the resulting single expression is
nonnegative exactly on the feasible set.  The open-loop feasibility function
is psi(x) = -R(x): negative means strictly feasible, zero is the boundary,
positive measures the worst violation (exactly max_j g_j when alpha = 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dsl import AlphaOutOfRangeError, Problem
from .expr import Env, Expr, const, eval_arrays, eval_expr, sqrt, substitute, vmax

__all__ = [
    "r_conj", "r_disj", "r_neg", "conj_expr", "disj_expr", "build_region",
    "eval_region", "psi_open", "RegionExpr", "PsiEval", "NonFiniteInputError",
    "HasControlVariablesError",
]


class NonFiniteInputError(ValueError):
    pass


class HasControlVariablesError(ValueError):
    """psi_open was called on a problem with control variables."""

    def __init__(self, names):
        super().__init__(
            f"problem has control variables {', '.join(names)}; use psi_closed"
        )
        self.names = tuple(names)


def _check_alpha(alpha: float):
    if not (-1.0 < alpha <= 1.0):
        raise AlphaOutOfRangeError(alpha)


def _check_finite(*values: float):
    for v in values:
        if not math.isfinite(v):
            raise NonFiniteInputError(f"R-function argument must be finite, got {v!r}")


def _radicand(a: float, b: float, alpha: float) -> float:
    # a^2 + b^2 - 2*alpha*a*b >= 0 holds for |alpha| <= 1; float rounding can
    # produce a tiny negative, which is clamped.  Anything below the
    # scale-aware threshold would be a genuine math error.
    r = (a * a + b * b) - (2.0 * alpha) * (a * b)
    if r < 0.0:
        if r < -1e-12 * max(1.0, a * a + b * b):
            raise ValueError(f"radicand {r!r} is negative beyond rounding error")
        return 0.0
    return r


def r_conj(a: float, b: float, alpha: float = 1.0) -> float:
    """R-conjunction: sign(result) == sign(min(a, b)); min itself at alpha=1."""
    _check_alpha(alpha)
    _check_finite(a, b)
    if alpha == 1.0:
        return min(a, b)
    return ((a + b) - math.sqrt(_radicand(a, b, alpha))) / (1.0 + alpha)


def r_disj(a: float, b: float, alpha: float = 1.0) -> float:
    """R-disjunction: sign(result) == sign(max(a, b)); max itself at alpha=1."""
    _check_alpha(alpha)
    _check_finite(a, b)
    if alpha == 1.0:
        return max(a, b)
    return ((a + b) + math.sqrt(_radicand(a, b, alpha))) / (1.0 + alpha)


def r_neg(a: float) -> float:
    """R-negation (set complement)."""
    _check_finite(a)
    return -a


# ----------------------------------------------------------------------
# Symbolic composition
# ----------------------------------------------------------------------

def conj_expr(a: Expr, b: Expr, alpha: float) -> Expr:
    """Symbolic R-conjunction of two expression trees."""
    _check_alpha(alpha)
    if alpha == 1.0:
        return ((a + b) - abs(a - b)) / const(2.0)
    radicand = (a * a + b * b) - const(2.0 * alpha) * (a * b)
    # max(., 0) mirrors the numeric clamp: the radicand is nonnegative up to
    # rounding, and sqrt must stay total during evaluation.
    return ((a + b) - sqrt(vmax(radicand, const(0.0)))) / const(1.0 + alpha)


def disj_expr(a: Expr, b: Expr, alpha: float) -> Expr:
    """Symbolic R-disjunction of two expression trees."""
    _check_alpha(alpha)
    if alpha == 1.0:
        return ((a + b) + abs(a - b)) / const(2.0)
    radicand = (a * a + b * b) - const(2.0 * alpha) * (a * b)
    return ((a + b) + sqrt(vmax(radicand, const(0.0)))) / const(1.0 + alpha)


@dataclass(frozen=True, slots=True)
class RegionExpr:
    """A composed implicit region: nonnegative exactly on the feasible set.

    ``expr`` ranges over the problem's non-design variables (design values are
    substituted in).  ``domain`` records each free variable's declared box, in
    declaration order; exploration tools use it as the default sampling box.
    """

    expr: Expr
    alpha: float
    fold_order: tuple[str, ...]
    problem_ref: str
    domain: tuple[tuple[str, float, float], ...]

    @property
    def free_vars(self) -> tuple[str, ...]:
        return tuple(name for name, _, _ in self.domain)

    def value_at(self, point: Env) -> float:
        return eval_expr(self.expr, point)

    def values_at(self, arrays) -> np.ndarray:
        return eval_arrays(self.expr, arrays)


def build_region(p: Problem) -> RegionExpr:
    """Fold the problem's constraints into a single implicit region function.

    phi_j = -g_j, folded left to right in declaration order with the
    alpha-conjunction; design variables are replaced by their fixed values.
    """
    _check_alpha(p.alpha)
    design = p.design_values()
    phis = []
    for label, g in p.constraints:
        phi = Expr("neg", args=(g,))
        if design:
            phi = substitute(phi, design)
        phis.append(phi)
    acc = phis[0]
    for phi in phis[1:]:
        acc = conj_expr(acc, phi, p.alpha)
    domain = tuple(
        (v.name, v.lo, v.hi) for v in p.variables if v.role in ("uncertain", "control")
    )
    return RegionExpr(
        expr=acc,
        alpha=p.alpha,
        fold_order=p.labels(),
        problem_ref=p.name,
        domain=domain,
    )


def eval_region(r: RegionExpr, point: Env) -> float:
    """Evaluate the region function at a point binding all free variables."""
    return r.value_at(point)


# ----------------------------------------------------------------------
# Open-loop feasibility
# ----------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class PsiEval:
    """One feasibility-function evaluation.

    ``psi`` is -R at the evaluated point (at the optimal control for closed
    loop); nonpositive means feasible.  ``per_constraint`` holds each
    constraint value g_j, ``active_label`` the arg-max constraint (ties go to
    the lowest index).  ``z_star`` is the optimal control (closed loop only),
    ``in_domain`` flags whether the point lies inside the declared domain
    (evaluating outside is legitimate for boundary studies, so it is a flag,
    not an error).
    """

    psi: float
    per_constraint: tuple[tuple[str, float], ...]
    active_label: str
    z_star: dict[str, float] | None
    converged: bool
    inner_evals: int
    in_domain: bool


def point_in_domain(p: Problem, x: Env) -> bool:
    for v in p.uncertain:
        xv = x.get(v.name)
        if xv is None or not (v.lo <= xv <= v.hi):
            return False
    return True


def constraint_values(p: Problem, env: Env) -> tuple[tuple[str, float], ...]:
    """Each g_j at ``env`` (design values are supplied automatically)."""
    full = {**p.design_values(), **env}
    return tuple((label, eval_expr(g, full)) for label, g in p.constraints)


def active_constraint(values: tuple[tuple[str, float], ...]) -> str:
    best_label, best = values[0]
    for label, v in values[1:]:
        if v > best:
            best_label, best = label, v
    return best_label


def psi_open(p: Problem, x: Env, region: RegionExpr | None = None) -> PsiEval:
    """Open-loop feasibility at ``x``: psi = -R(x), no inner minimization."""
    controls = [v.name for v in p.controls]
    if controls:
        raise HasControlVariablesError(controls)
    if region is None:
        region = build_region(p)
    psi = -region.value_at(x)
    values = constraint_values(p, x)
    return PsiEval(
        psi=psi,
        per_constraint=values,
        active_label=active_constraint(values),
        z_star=None,
        converged=True,
        inner_evals=0,
        in_domain=point_in_domain(p, x),
    )
