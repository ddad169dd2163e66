"""Problem-file parsing and serialization.

A problem file is line oriented.  Each non-blank line is one directive:

    problem NAME
    param NAME in [LO, HI]          # uncertain parameter with its domain
    control NAME in [LO, HI]        # manipulated variable with its box
    design NAME = VALUE             # design variable fixed to a value
    alpha VALUE                     # R-function smoothness, -1 < alpha <= 1
    constraint LABEL: EXPR <= EXPR  # also accepts >=, normalized by negation

Comments run from ``#`` to end of line.  Expressions use ``+ - * /``, ``^``
(right-associative power with a constant exponent), unary minus, parentheses,
and the calls ``abs(e)``, ``sqrt(e)``, ``min(e, e, ...)``, ``max(e, e, ...)``.
Bare numbers in declarations may carry a leading minus.

Constraints follow the convention g <= 0: ``lhs <= rhs`` stores g = lhs - rhs
(just lhs when rhs is a literal 0), and ``lhs >= rhs`` stores g = rhs - lhs.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, replace

from .expr import Expr, ExprError, const, eval_expr, to_text, fmt_float

__all__ = [
    "VariableSpec", "Problem", "parse_problem", "parse_expr", "emit_problem",
    "DslError", "ProblemSyntaxError", "DuplicateVariableError",
    "UnknownVariableError", "AlphaOutOfRangeError", "MissingBoundsError",
    "UnreferencedVariableWarning", "ROLES",
]

ROLES = ("uncertain", "control", "design")

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


class DslError(Exception):
    """Base class for problem-file errors."""


class ProblemSyntaxError(DslError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class DuplicateVariableError(DslError):
    def __init__(self, name: str):
        super().__init__(f"variable '{name}' declared more than once")
        self.name = name


class UnknownVariableError(DslError):
    def __init__(self, name: str, constraint: str):
        super().__init__(f"constraint '{constraint}' references undeclared variable '{name}'")
        self.name = name
        self.constraint = constraint


class AlphaOutOfRangeError(DslError):
    def __init__(self, alpha: float):
        super().__init__(f"alpha must satisfy -1 < alpha <= 1, got {alpha!r}")
        self.alpha = alpha


class MissingBoundsError(DslError):
    def __init__(self, message: str):
        super().__init__(message)


class UnreferencedVariableWarning(UserWarning):
    pass


@dataclass(frozen=True, slots=True)
class VariableSpec:
    """A declared variable: its role and either bounds or a fixed value."""

    name: str
    role: str  # "uncertain" | "control" | "design"
    lo: float | None = None
    hi: float | None = None
    fixed_value: float | None = None


@dataclass(frozen=True, slots=True)
class Problem:
    """A validated feasibility problem: variables, constraints g <= 0, alpha."""

    name: str
    variables: tuple[VariableSpec, ...]
    constraints: tuple[tuple[str, Expr], ...]
    alpha: float = 1.0

    def by_role(self, role: str) -> tuple[VariableSpec, ...]:
        return tuple(v for v in self.variables if v.role == role)

    @property
    def uncertain(self) -> tuple[VariableSpec, ...]:
        return self.by_role("uncertain")

    @property
    def controls(self) -> tuple[VariableSpec, ...]:
        return self.by_role("control")

    @property
    def designs(self) -> tuple[VariableSpec, ...]:
        return self.by_role("design")

    def design_values(self) -> dict[str, float]:
        return {v.name: v.fixed_value for v in self.designs}

    def spec(self, name: str) -> VariableSpec:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.constraints)

    def with_alpha(self, alpha: float) -> "Problem":
        if not (-1.0 < alpha <= 1.0):
            raise AlphaOutOfRangeError(alpha)
        return replace(self, alpha=alpha)


# ----------------------------------------------------------------------
# Tokenizer
# ----------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""(?P<ws>[ \t]+)
      | (?P<number>(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?)
      | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
      | (?P<op><=|>=|[-+*/^(),\[\]=:])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True, slots=True)
class _Token:
    kind: str  # "number" | "ident" | "op" | "end"
    text: str
    line: int
    column: int


def _tokenize_line(text: str, lineno: int) -> list[_Token]:
    hash_pos = text.find("#")
    if hash_pos >= 0:
        text = text[:hash_pos]
    tokens: list[_Token] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ProblemSyntaxError(f"unexpected character {text[pos]!r}", lineno, pos + 1)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), lineno, pos + 1))
        pos = m.end()
    tokens.append(_Token("end", "", lineno, pos + 1))
    return tokens


# ----------------------------------------------------------------------
# Expression parser: precedence climbing via recursive descent.
#   expr  := term  (("+"|"-") term)*
#   term  := unary (("*"|"/") unary)*
#   unary := "-" unary | power
#   power := atom ["^" unary]          (exponent must fold to a constant)
#   atom  := NUMBER | IDENT | IDENT "(" expr ("," expr)* ")" | "(" expr ")"
# ----------------------------------------------------------------------

_CALLS = {"abs": (1, 1), "sqrt": (1, 1), "min": (2, None), "max": (2, None)}


class _ExprParser:
    def __init__(self, tokens: list[_Token], start: int = 0):
        self.tokens = tokens
        self.i = start

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def take(self) -> _Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def error(self, message: str, tok: _Token | None = None):
        tok = tok or self.peek()
        raise ProblemSyntaxError(message, tok.line, tok.column)

    def parse_expr(self) -> Expr:
        node = self.parse_term()
        while self.peek().kind == "op" and self.peek().text in ("+", "-"):
            op = self.take().text
            rhs = self.parse_term()
            node = Expr("add" if op == "+" else "sub", args=(node, rhs))
        return node

    def parse_term(self) -> Expr:
        node = self.parse_unary()
        while self.peek().kind == "op" and self.peek().text in ("*", "/"):
            op = self.take().text
            rhs = self.parse_unary()
            node = Expr("mul" if op == "*" else "div", args=(node, rhs))
        return node

    def parse_unary(self) -> Expr:
        if self.peek().kind == "op" and self.peek().text == "-":
            self.take()
            return Expr("neg", args=(self.parse_unary(),))
        return self.parse_power()

    def parse_power(self) -> Expr:
        base = self.parse_atom()
        if self.peek().kind == "op" and self.peek().text == "^":
            caret = self.take()
            exponent_expr = self.parse_unary()
            try:
                exponent = eval_expr(exponent_expr, {})
            except ExprError:
                self.error("power exponent must be a constant expression", caret)
            return Expr("pow", exponent=exponent, args=(base,))
        return base

    def parse_atom(self) -> Expr:
        tok = self.peek()
        if tok.kind == "number":
            self.take()
            value = float(tok.text)
            if not math.isfinite(value):
                self.error(f"numeric literal {tok.text} overflows a double", tok)
            return const(value)
        if tok.kind == "ident":
            self.take()
            if tok.text in _CALLS and self.peek().kind == "op" and self.peek().text == "(":
                return self.parse_call(tok)
            return Expr("var", name=tok.text)
        if tok.kind == "op" and tok.text == "(":
            self.take()
            node = self.parse_expr()
            self.expect_op(")")
            return node
        self.error("expected a number, variable, function call, or '('", tok)

    def parse_call(self, name_tok: _Token) -> Expr:
        min_args, max_args = _CALLS[name_tok.text]
        self.expect_op("(")
        args = [self.parse_expr()]
        while self.peek().kind == "op" and self.peek().text == ",":
            self.take()
            args.append(self.parse_expr())
        self.expect_op(")")
        if len(args) < min_args or (max_args is not None and len(args) > max_args):
            self.error(
                f"{name_tok.text} takes "
                + (f"exactly {min_args}" if min_args == max_args else f"at least {min_args}")
                + f" argument(s), got {len(args)}",
                name_tok,
            )
        return Expr(name_tok.text, args=tuple(args))

    def expect_op(self, text: str) -> _Token:
        tok = self.peek()
        if tok.kind == "op" and tok.text == text:
            return self.take()
        self.error(f"expected '{text}'", tok)

    def expect_end(self):
        if self.peek().kind != "end":
            self.error("unexpected trailing input")


def parse_expr(text: str) -> Expr:
    """Parse a standalone expression (single line)."""
    lines = text.splitlines() or [""]
    if len([ln for ln in lines if ln.strip()]) > 1:
        raise ProblemSyntaxError("expression must be a single line", 2, 1)
    lineno, line = next(
        ((i, ln) for i, ln in enumerate(lines, start=1) if ln.strip()), (1, "")
    )
    parser = _ExprParser(_tokenize_line(line, lineno))
    node = parser.parse_expr()
    parser.expect_end()
    return node


# ----------------------------------------------------------------------
# Problem parsing
# ----------------------------------------------------------------------

def _parse_signed_number(p: _ExprParser) -> float:
    negate = False
    while p.peek().kind == "op" and p.peek().text == "-":
        p.take()
        negate = not negate
    tok = p.peek()
    if tok.kind != "number":
        p.error("expected a number", tok)
    p.take()
    v = float(tok.text)
    if not math.isfinite(v):
        p.error(f"numeric literal {tok.text} overflows a double", tok)
    return -v if negate else v


def _expect_ident(p: _ExprParser, what: str) -> _Token:
    tok = p.peek()
    if tok.kind != "ident":
        p.error(f"expected {what}", tok)
    return p.take()


def _expect_keyword(p: _ExprParser, word: str):
    tok = p.peek()
    if not (tok.kind == "ident" and tok.text == word):
        p.error(f"expected '{word}'", tok)
    p.take()


def parse_problem(text: str) -> Problem:
    """Parse and validate a problem file."""
    name = "unnamed"
    saw_header = False
    variables: list[VariableSpec] = []
    names_seen: set[str] = set()
    constraints: list[tuple[str, Expr]] = []
    labels_seen: set[str] = set()
    alpha = 1.0

    for lineno, raw in enumerate(text.splitlines(), start=1):
        tokens = _tokenize_line(raw, lineno)
        if tokens[0].kind == "end":
            continue
        head = tokens[0]
        if head.kind != "ident":
            raise ProblemSyntaxError("expected a directive keyword", lineno, head.column)
        p = _ExprParser(tokens, start=1)

        if head.text == "problem":
            if saw_header:
                raise ProblemSyntaxError("duplicate 'problem' header", lineno, head.column)
            name = _expect_ident(p, "a problem name").text
            saw_header = True
            p.expect_end()

        elif head.text in ("param", "control"):
            ident = _expect_ident(p, "a variable name")
            if ident.text in names_seen:
                raise DuplicateVariableError(ident.text)
            _expect_keyword(p, "in")
            p.expect_op("[")
            lo = _parse_signed_number(p)
            p.expect_op(",")
            hi = _parse_signed_number(p)
            p.expect_op("]")
            p.expect_end()
            if not lo < hi:
                raise MissingBoundsError(
                    f"variable '{ident.text}': bounds [{lo!r}, {hi!r}] are empty (need lo < hi)"
                )
            role = "uncertain" if head.text == "param" else "control"
            variables.append(VariableSpec(ident.text, role, lo=lo, hi=hi))
            names_seen.add(ident.text)

        elif head.text == "design":
            ident = _expect_ident(p, "a variable name")
            if ident.text in names_seen:
                raise DuplicateVariableError(ident.text)
            p.expect_op("=")
            value = _parse_signed_number(p)
            p.expect_end()
            variables.append(VariableSpec(ident.text, "design", fixed_value=value))
            names_seen.add(ident.text)

        elif head.text == "alpha":
            alpha = _parse_signed_number(p)
            p.expect_end()
            if not (-1.0 < alpha <= 1.0):
                raise AlphaOutOfRangeError(alpha)

        elif head.text == "constraint":
            label = _expect_ident(p, "a constraint label")
            if label.text in labels_seen:
                raise ProblemSyntaxError(
                    f"duplicate constraint label '{label.text}'", lineno, label.column
                )
            p.expect_op(":")
            lhs = p.parse_expr()
            rel = p.peek()
            if not (rel.kind == "op" and rel.text in ("<=", ">=")):
                p.error("expected '<=' or '>='", rel)
            p.take()
            rhs = p.parse_expr()
            p.expect_end()
            if rel.text == "<=":
                g = lhs if _is_zero(rhs) else Expr("sub", args=(lhs, rhs))
            elif _is_zero(lhs):
                g = rhs
            elif _is_zero(rhs):
                g = Expr("neg", args=(lhs,))
            else:
                g = Expr("sub", args=(rhs, lhs))
            constraints.append((label.text, g))
            labels_seen.add(label.text)

        else:
            raise ProblemSyntaxError(
                f"unknown directive '{head.text}'", lineno, head.column
            )

    if not constraints:
        raise MissingBoundsError("a problem needs at least one constraint")

    referenced: set[str] = set()
    for label, g in constraints:
        for vname in sorted(g.variables()):
            if vname not in names_seen:
                raise UnknownVariableError(vname, label)
            referenced.add(vname)
    for v in variables:
        if v.name not in referenced:
            warnings.warn(
                f"variable '{v.name}' is declared but referenced by no constraint",
                UnreferencedVariableWarning,
                stacklevel=2,
            )

    return Problem(
        name=name,
        variables=tuple(variables),
        constraints=tuple(constraints),
        alpha=alpha,
    )


def _is_zero(e: Expr) -> bool:
    return e.kind == "const" and e.value == 0.0


# ----------------------------------------------------------------------
# Emission
# ----------------------------------------------------------------------

def emit_problem(p: Problem) -> str:
    """Serialize a Problem to text that re-parses to an identical Problem."""
    lines = [f"problem {p.name}", f"alpha {fmt_float(p.alpha)}"]
    for v in p.variables:
        if v.role == "uncertain":
            lines.append(f"param {v.name} in [{fmt_float(v.lo)}, {fmt_float(v.hi)}]")
        elif v.role == "control":
            lines.append(f"control {v.name} in [{fmt_float(v.lo)}, {fmt_float(v.hi)}]")
        else:
            lines.append(f"design {v.name} = {fmt_float(v.fixed_value)}")
    for label, g in p.constraints:
        lines.append(f"constraint {label}: {to_text(g)} <= 0")
    return "\n".join(lines) + "\n"
