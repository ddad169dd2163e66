"""Immutable expression trees over named real variables.

Trees are built from constants, variables, negation, abs, sqrt, the four
arithmetic operators, real powers, and n-ary min/max.  They are the substrate
for constraint functions and for implicit region functions composed with the
R-function combinators.

Two evaluators are provided: :func:`eval_expr` for a single point, and
:func:`eval_arrays` which evaluates the same tree over numpy arrays of points
with identical per-node semantics (including the division and domain guards).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

Env = Mapping[str, float]

# Divisors smaller than this are treated as zero.  Subnormal cutoff: a
# well-posed problem never divides by anything this small, so hitting the
# guard signals a malformed problem rather than a numeric accident.
DIV_EPS = 1e-300

# Exponents within this distance of an integer are evaluated by repeated
# multiplication (valid for negative bases).  Beyond _POW_LOOP_MAX factors the
# loop would crawl, so evaluation falls back to libm pow, which handles
# integral exponents of negative bases exactly as well.
_INT_EXP_TOL = 1e-9
_POW_LOOP_MAX = 64


class ExprError(Exception):
    """Base class for expression construction and evaluation failures."""


class UnboundVariableError(ExprError):
    def __init__(self, name: str):
        super().__init__(f"variable '{name}' is not bound")
        self.name = name


class DivisionByZeroError(ExprError):
    def __init__(self, divisor: float):
        super().__init__(
            f"division by (near-)zero divisor {divisor!r} (|divisor| < {DIV_EPS:g})"
        )
        self.divisor = divisor


class DomainError(ExprError):
    """sqrt of a negative value, or a non-integer power of a negative base."""


class NonFiniteResultError(ExprError):
    """An operation overflowed or produced NaN."""


_KINDS = frozenset(
    ["const", "var", "neg", "abs", "sqrt", "add", "sub", "mul", "div", "pow", "min", "max"]
)


@dataclass(frozen=True, slots=True)
class Expr:
    """One node of an immutable, finite expression tree.

    ``kind`` selects the payload: ``value`` for constants, ``name`` for
    variables, ``exponent`` for powers, ``args`` for everything with children.
    Instances are safe to share across threads; there is no interior mutation.
    """

    kind: str
    value: float = 0.0
    name: str = ""
    exponent: float = 0.0
    args: tuple["Expr", ...] = ()

    # -- programmatic construction ------------------------------------
    def __add__(self, other):
        return Expr("add", args=(self, as_expr(other)))

    def __radd__(self, other):
        return Expr("add", args=(as_expr(other), self))

    def __sub__(self, other):
        return Expr("sub", args=(self, as_expr(other)))

    def __rsub__(self, other):
        return Expr("sub", args=(as_expr(other), self))

    def __mul__(self, other):
        return Expr("mul", args=(self, as_expr(other)))

    def __rmul__(self, other):
        return Expr("mul", args=(as_expr(other), self))

    def __truediv__(self, other):
        return Expr("div", args=(self, as_expr(other)))

    def __rtruediv__(self, other):
        return Expr("div", args=(as_expr(other), self))

    def __pow__(self, exponent):
        return powi(self, exponent)

    def __neg__(self):
        return Expr("neg", args=(self,))

    def __abs__(self):
        return Expr("abs", args=(self,))

    def variables(self) -> set[str]:
        """Set of variable names referenced anywhere in the tree."""
        out: set[str] = set()
        stack = [self]
        while stack:
            e = stack.pop()
            if e.kind == "var":
                out.add(e.name)
            else:
                stack.extend(e.args)
        return out


def const(v: float) -> Expr:
    v = float(v)
    if not math.isfinite(v):
        raise ValueError(f"constant must be finite, got {v!r}")
    return Expr("const", value=v)


def var(name: str) -> Expr:
    if not name:
        raise ValueError("variable name must be non-empty")
    return Expr("var", name=name)


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    return const(x)


def powi(base, exponent: float) -> Expr:
    """Power node with a fixed real exponent."""
    return Expr("pow", exponent=float(exponent), args=(as_expr(base),))


def sqrt(x) -> Expr:
    return Expr("sqrt", args=(as_expr(x),))


def vmin(*args) -> Expr:
    if len(args) < 2:
        raise ValueError("min requires at least 2 arguments")
    return Expr("min", args=tuple(as_expr(a) for a in args))


def vmax(*args) -> Expr:
    if len(args) < 2:
        raise ValueError("max requires at least 2 arguments")
    return Expr("max", args=tuple(as_expr(a) for a in args))


# ----------------------------------------------------------------------
# Scalar evaluation
# ----------------------------------------------------------------------

def eval_expr(e: Expr, env: Env) -> float:
    """Evaluate ``e`` at the point ``env``.

    Raises UnboundVariableError, DivisionByZeroError, DomainError, or
    NonFiniteResultError; otherwise the result is a finite float.
    """
    k = e.kind
    if k == "const":
        return e.value
    if k == "var":
        try:
            return float(env[e.name])
        except KeyError:
            raise UnboundVariableError(e.name) from None
    if k == "add":
        v = eval_expr(e.args[0], env) + eval_expr(e.args[1], env)
    elif k == "sub":
        v = eval_expr(e.args[0], env) - eval_expr(e.args[1], env)
    elif k == "mul":
        v = eval_expr(e.args[0], env) * eval_expr(e.args[1], env)
    elif k == "div":
        den = eval_expr(e.args[1], env)
        if abs(den) < DIV_EPS:
            raise DivisionByZeroError(den)
        v = eval_expr(e.args[0], env) / den
    elif k == "neg":
        return -eval_expr(e.args[0], env)
    elif k == "abs":
        return abs(eval_expr(e.args[0], env))
    elif k == "sqrt":
        a = eval_expr(e.args[0], env)
        if a < 0.0:
            raise DomainError(f"sqrt of negative value {a!r}")
        return math.sqrt(a)
    elif k == "pow":
        v = _pow_scalar(eval_expr(e.args[0], env), e.exponent)
    elif k == "min":
        return min(eval_expr(a, env) for a in e.args)
    elif k == "max":
        return max(eval_expr(a, env) for a in e.args)
    else:  # pragma: no cover - construction prevents unknown kinds
        raise ExprError(f"unknown node kind {k!r}")
    if not math.isfinite(v):
        raise NonFiniteResultError(f"non-finite intermediate result in '{k}' node")
    return v


def _pow_scalar(base: float, exponent: float) -> float:
    n = round(exponent)
    if abs(exponent - n) < _INT_EXP_TOL:
        n = int(n)
        if n == 0:
            return 1.0
        m = abs(n)
        if m > _POW_LOOP_MAX:
            try:
                acc = math.pow(base, m)
            except OverflowError:
                raise NonFiniteResultError("overflow in 'pow' node") from None
        else:
            acc = base
            for _ in range(m - 1):
                acc = acc * base
        if n < 0:
            if abs(acc) < DIV_EPS:
                raise DivisionByZeroError(acc)
            acc = 1.0 / acc
        return acc
    if base < 0.0:
        raise DomainError(
            f"non-integer power {exponent!r} of negative base {base!r}"
        )
    if base == 0.0 and exponent < 0.0:
        raise DivisionByZeroError(base)
    try:
        return math.pow(base, exponent)
    except OverflowError:
        raise NonFiniteResultError("overflow in 'pow' node") from None


# ----------------------------------------------------------------------
# Vectorized evaluation
# ----------------------------------------------------------------------

def eval_arrays(e: Expr, arrays: Mapping[str, np.ndarray]) -> np.ndarray:
    """Evaluate ``e`` over arrays of points (all arrays share one shape).

    Semantics match :func:`eval_expr` per sample.  On a guard violation the
    raised error carries a ``sample_index`` attribute (flat index of the first
    offending sample) so callers can report the exact point.
    """
    shape = None
    for a in arrays.values():
        shape = np.shape(a)
        break
    if shape is None:
        shape = ()
    # Guard violations raise; suppress numpy's warnings for the intermediate
    # non-finite values the per-node checks are about to report.
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        out = _eval_vec(e, arrays)
    if not isinstance(out, np.ndarray):
        return np.full(shape, out, dtype=float)
    return out


def _first_bad(mask: np.ndarray) -> int:
    return int(np.flatnonzero(mask)[0])


def _check_finite_vec(v, kind: str):
    if isinstance(v, np.ndarray):
        fin = np.isfinite(v)
        if not fin.all():
            err = NonFiniteResultError(f"non-finite intermediate result in '{kind}' node")
            err.sample_index = _first_bad(~fin)
            raise err
    elif not math.isfinite(v):
        raise NonFiniteResultError(f"non-finite intermediate result in '{kind}' node")
    return v


def _eval_vec(e: Expr, arrays: Mapping[str, np.ndarray]):
    k = e.kind
    if k == "const":
        return e.value
    if k == "var":
        try:
            return arrays[e.name]
        except KeyError:
            raise UnboundVariableError(e.name) from None
    if k == "add":
        return _check_finite_vec(_eval_vec(e.args[0], arrays) + _eval_vec(e.args[1], arrays), k)
    if k == "sub":
        return _check_finite_vec(_eval_vec(e.args[0], arrays) - _eval_vec(e.args[1], arrays), k)
    if k == "mul":
        return _check_finite_vec(_eval_vec(e.args[0], arrays) * _eval_vec(e.args[1], arrays), k)
    if k == "div":
        den = _eval_vec(e.args[1], arrays)
        small = np.abs(den) < DIV_EPS
        if np.any(small):
            if isinstance(den, np.ndarray):
                i = _first_bad(small)
                err = DivisionByZeroError(float(den.flat[i]))
                err.sample_index = i
            else:
                err = DivisionByZeroError(float(den))
            raise err
        return _check_finite_vec(_eval_vec(e.args[0], arrays) / den, k)
    if k == "neg":
        return -_eval_vec(e.args[0], arrays)
    if k == "abs":
        return np.abs(_eval_vec(e.args[0], arrays))
    if k == "sqrt":
        a = _eval_vec(e.args[0], arrays)
        bad = np.asarray(a) < 0.0
        if np.any(bad):
            err = DomainError("sqrt of negative value")
            if isinstance(a, np.ndarray):
                err.sample_index = _first_bad(bad)
            raise err
        return np.sqrt(a)
    if k == "pow":
        return _pow_vec(_eval_vec(e.args[0], arrays), e.exponent)
    if k == "min":
        vals = [_eval_vec(a, arrays) for a in e.args]
        acc = vals[0]
        for v in vals[1:]:
            acc = np.minimum(acc, v)
        return acc
    if k == "max":
        vals = [_eval_vec(a, arrays) for a in e.args]
        acc = vals[0]
        for v in vals[1:]:
            acc = np.maximum(acc, v)
        return acc
    raise ExprError(f"unknown node kind {k!r}")  # pragma: no cover


def _pow_vec(base, exponent: float):
    n = round(exponent)
    if abs(exponent - n) < _INT_EXP_TOL:
        n = int(n)
        if n == 0:
            return np.ones_like(np.asarray(base, dtype=float)) if isinstance(base, np.ndarray) else 1.0
        m = abs(n)
        if m > _POW_LOOP_MAX:
            acc = np.power(base, float(m))
        else:
            acc = base
            for _ in range(m - 1):
                acc = acc * base
        if n < 0:
            small = np.abs(acc) < DIV_EPS
            if np.any(small):
                err = DivisionByZeroError(0.0)
                if isinstance(acc, np.ndarray):
                    err.sample_index = _first_bad(small)
                raise err
            acc = 1.0 / acc
        return _check_finite_vec(acc, "pow")
    neg = np.asarray(base) < 0.0
    if np.any(neg):
        err = DomainError(f"non-integer power {exponent!r} of negative base")
        if isinstance(base, np.ndarray):
            err.sample_index = _first_bad(neg)
        raise err
    return _check_finite_vec(np.power(base, exponent), "pow")


# ----------------------------------------------------------------------
# Substitution with constant folding
# ----------------------------------------------------------------------

def substitute(e: Expr, bindings: Env) -> Expr:
    """Replace bound variables with constants and fold constant subtrees.

    Total: a subtree whose folding would raise (division guard, domain error)
    is left unfolded and the error surfaces at evaluation time instead.  For
    any env covering the remaining variables,
    ``eval_expr(substitute(e, b), env) == eval_expr(e, {**env, **b})``.
    """
    if e.kind == "const":
        return e
    if e.kind == "var":
        if e.name in bindings:
            return const(float(bindings[e.name]))
        return e
    new_args = tuple(substitute(a, bindings) for a in e.args)
    folded = Expr(e.kind, value=e.value, name=e.name, exponent=e.exponent, args=new_args)
    if all(a.kind == "const" for a in new_args):
        try:
            return const(eval_expr(folded, {}))
        except ExprError:
            return folded
    return folded


# ----------------------------------------------------------------------
# Serialization (canonical text; the grammar is owned by the problem-file
# parser, see rfeas.dsl)
# ----------------------------------------------------------------------

_PREC = {
    "add": 1, "sub": 1,
    "mul": 2, "div": 2,
    "neg": 3,
    "pow": 4,
    "var": 5, "abs": 5, "sqrt": 5, "min": 5, "max": 5,
}


def _prec(e: Expr) -> int:
    if e.kind == "const":
        # Negative constants render with a leading minus; parenthesize them in
        # every composite context so the text re-parses unambiguously.
        return 0 if e.value < 0 else 5
    return _PREC[e.kind]


def fmt_float(v: float) -> str:
    """Shortest round-trip decimal form."""
    return repr(float(v))


def to_text(e: Expr) -> str:
    """Canonical text form; ``parse_expr(to_text(e))`` evaluates identically."""
    k = e.kind
    if k == "const":
        return fmt_float(e.value)
    if k == "var":
        return e.name
    if k in ("abs", "sqrt", "min", "max"):
        return f"{k}({', '.join(to_text(a) for a in e.args)})"
    if k == "neg":
        inner = to_text(e.args[0])
        if _prec(e.args[0]) <= 3:
            inner = f"({inner})"
        return f"-{inner}"
    if k == "pow":
        base = to_text(e.args[0])
        if _prec(e.args[0]) <= 4:
            base = f"({base})"
        exp = e.exponent
        if float(exp).is_integer() and abs(exp) < 1e15:
            etxt = str(int(exp))
        else:
            etxt = fmt_float(exp)
        if exp < 0:
            etxt = f"({etxt})"
        return f"{base}^{etxt}"
    # binary arithmetic
    sym = {"add": "+", "sub": "-", "mul": "*", "div": "/"}[k]
    p = _PREC[k]
    left, right = e.args
    lt = to_text(left)
    rt = to_text(right)
    if _prec(left) < p:
        lt = f"({lt})"
    if _prec(right) <= p:
        rt = f"({rt})"
    return f"{lt} {sym} {rt}"
