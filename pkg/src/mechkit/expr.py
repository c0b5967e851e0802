"""
Arithmetic expressions over named variables and parameters.

Lagrangians, Hamiltonians, metric entries, constraints and generator
components are all written as plain text in this grammar (loosest to
tightest binding)::

    expr    := term (('+' | '-') term)*
    term    := power (('*' | '/') power)*
    power   := unary ('^' power)?            # right associative
    unary   := '-' unary | primary
    primary := NUMBER | IDENT | IDENT '(' args ')' | '(' expr ')'

Unary minus binds tighter than ``^``, so ``-x^2`` is ``(-x)^2``; write
``-(x^2)`` or ``0 - x^2`` for the other reading. ``a^b`` is the same node
as ``pow(a, b)``. There is no implicit multiplication.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

FUNCTIONS = {
    "sin": 1, "cos": 1, "tan": 1, "exp": 1, "log": 1, "sqrt": 1, "abs": 1,
    "pow": 2,
}

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


class ExprError(Exception):
    """Base class for expression errors."""


class ParseError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class UnknownFunction(ParseError):
    pass


class UnboundIdentifier(ExprError):
    def __init__(self, name: str):
        super().__init__(f"unbound identifier {name!r}")
        self.name = name


class DomainError(ExprError, ArithmeticError):
    def __init__(self, message: str, subexpr: "Expr | None" = None):
        where = f" in {to_string(subexpr)!r}" if subexpr is not None else ""
        super().__init__(message + where)
        self.subexpr = subexpr


@dataclass(frozen=True)
class Expr:
    """Immutable expression node.

    ``kind`` is one of ``const``, ``var``, ``param``, ``unary``, ``binary``
    or ``call``. Binary ``op`` is one of ``+ - * /``; ``^`` is stored as a
    ``pow`` call.
    """

    kind: str
    children: tuple["Expr", ...] = ()
    name: str = ""
    value: float = 0.0
    op: str = ""

    def __str__(self) -> str:
        return to_string(self)


def const(x: float) -> Expr:
    return Expr("const", value=float(x))


def var(name: str) -> Expr:
    _check_ident(name)
    return Expr("var", name=name)


def param(name: str) -> Expr:
    _check_ident(name)
    return Expr("param", name=name)


def _check_ident(name: str) -> None:
    if not _IDENT_RE.match(name or ""):
        raise ValueError(f"invalid identifier {name!r}")


@dataclass(frozen=True)
class VarLayout:
    """Ordered variable names with a name -> slot index map."""

    names: tuple[str, ...]
    index: Mapping[str, int] = field(init=False, repr=False, compare=False)

    def __init__(self, names: Iterable[str]):
        names = tuple(names)
        for n in names:
            _check_ident(n)
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate names in layout {names}")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "index", {n: i for i, n in enumerate(names)})

    def __len__(self) -> int:
        return len(self.names)

    def __contains__(self, name: object) -> bool:
        return name in self.index

    def __iter__(self):
        return iter(self.names)

    def slots(self, names: Iterable[str]) -> list[int]:
        return [self.index[n] for n in names]


# --------------------------------------------------------------------------
# tokenizer / parser

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    raw = text.encode("utf-8")
    tokens = []
    pos = 0
    n = len(text)
    while True:
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            rest = text[pos:]
            if rest.strip() == "":
                break
            skip = len(rest) - len(rest.lstrip())
            off = len(text[: pos + skip].encode("utf-8"))
            raise ParseError(f"unexpected character {text[pos + skip]!r}", off)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), len(text[:start].encode("utf-8"))))
        pos = m.end()
        if pos >= n:
            break
    tokens.append(("eof", "", len(raw)))
    return tokens


class _Parser:
    def __init__(self, text: str, variables: frozenset[str]):
        self.tokens = _tokenize(text)
        self.i = 0
        self.variables = variables

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, off = self.take()
        if text != value or kind == "eof":
            found = "end of input" if kind == "eof" else repr(text)
            raise ParseError(f"expected {value!r}, found {found}", off)

    def parse(self) -> Expr:
        e = self.expr()
        kind, text, off = self.peek()
        if kind != "eof":
            raise ParseError(f"expected operator or end of input, found {text!r}", off)
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            left = Expr("binary", (left, self.term()), op=op)
        return left

    def term(self) -> Expr:
        left = self.power()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            left = Expr("binary", (left, self.power()), op=op)
        return left

    def power(self) -> Expr:
        base = self.unary()
        if self.peek()[1] == "^" and self.peek()[0] == "op":
            self.take()
            return Expr("call", (base, self.power()), name="pow")
        return base

    def unary(self) -> Expr:
        if self.peek()[1] == "-" and self.peek()[0] == "op":
            self.take()
            return Expr("unary", (self.unary(),), op="-")
        return self.primary()

    def primary(self) -> Expr:
        kind, text, off = self.take()
        if kind == "num":
            return const(float(text))
        if kind == "ident":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                return self.call(text, off)
            if text in FUNCTIONS:
                raise ParseError(f"function {text!r} requires an argument list", off)
            return Expr("var" if text in self.variables else "param", name=text)
        if kind == "op" and text == "(":
            e = self.expr()
            self.expect(")")
            return e
        found = "end of input" if kind == "eof" else repr(text)
        raise ParseError(f"expected expression, found {found}", off)

    def call(self, name: str, off: int) -> Expr:
        if name not in FUNCTIONS:
            raise UnknownFunction(f"unknown function {name!r}", off)
        self.expect("(")
        args = []
        if not (self.peek()[1] == ")" and self.peek()[0] == "op"):
            args.append(self.expr())
            while self.peek()[1] == "," and self.peek()[0] == "op":
                self.take()
                args.append(self.expr())
        arity = FUNCTIONS[name]
        if len(args) != arity:
            raise ParseError(
                f"function {name!r} takes {arity} argument(s), got {len(args)}", off
            )
        self.expect(")")
        return Expr("call", tuple(args), name=name)


def parse(text: str, variables: Iterable[str] = ()) -> Expr:
    """Parse ``text`` into an expression tree.

    Identifiers listed in ``variables`` become ``var`` nodes, all others
    ``param`` nodes. The distinction is informational; evaluation binds
    names from the layout first, then from the parameter map.
    """
    if not isinstance(text, str):
        raise TypeError("expression text must be a string")
    return _Parser(text, frozenset(variables)).parse()


# --------------------------------------------------------------------------
# printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 3, "neg": 4}


def to_string(e: Expr) -> str:
    """Render ``e`` so that ``parse(to_string(e)) == e`` structurally."""
    return _fmt(e)[0]


def _fmt(e: Expr) -> tuple[str, int]:
    k = e.kind
    if k == "const":
        return repr(float(e.value)), 5
    if k in ("var", "param"):
        return e.name, 5
    if k == "unary":
        s, p = _fmt(e.children[0])
        if p < _PREC["neg"]:
            s = f"({s})"
        return "-" + s, _PREC["neg"]
    if k == "binary":
        p = _PREC[e.op]
        ls, lp = _fmt(e.children[0])
        rs, rp = _fmt(e.children[1])
        if lp < p:
            ls = f"({ls})"
        if rp <= p:
            rs = f"({rs})"
        return f"{ls} {e.op} {rs}", p
    if e.name == "pow":
        p = _PREC["^"]
        ls, lp = _fmt(e.children[0])
        rs, rp = _fmt(e.children[1])
        if lp <= p:
            ls = f"({ls})"
        if rp < p:
            rs = f"({rs})"
        return f"{ls}^{rs}", p
    return f"{e.name}(" + ", ".join(_fmt(c)[0] for c in e.children) + ")", 5


# --------------------------------------------------------------------------
# inspection

def free_identifiers(e: Expr) -> set[str]:
    out: set[str] = set()
    stack = [e]
    while stack:
        n = stack.pop()
        if n.kind in ("var", "param"):
            out.add(n.name)
        stack.extend(n.children)
    return out


def depends_on(e: Expr, names: Iterable[str]) -> bool:
    return not free_identifiers(e).isdisjoint(names)


# --------------------------------------------------------------------------
# evaluation

def ipow(x: float, n: int) -> float:
    """Integer power by repeated squaring and multiplication."""
    if n < 0:
        if x == 0.0:
            raise ZeroDivisionError
        return 1.0 / ipow(x, -n)
    result = 1.0
    base = x
    while n:
        if n & 1:
            result *= base
        n >>= 1
        if n:
            base *= base
    return result


def integral_exponent(y: float) -> int | None:
    if float(y).is_integer() and abs(y) <= 2**31:
        return int(y)
    return None


def real_pow(x: float, y: float, node: Expr | None = None) -> float:
    n = integral_exponent(y)
    if n is not None:
        try:
            return ipow(x, n)
        except ZeroDivisionError:
            raise DomainError("zero raised to a negative power", node) from None
    if x <= 0.0:
        raise DomainError("non-integer power of a non-positive base", node)
    return math.exp(y * math.log(x))


def _unary_fn(name: str, x: float, node: Expr) -> float:
    if name == "sin":
        return math.sin(x)
    if name == "cos":
        return math.cos(x)
    if name == "tan":
        if math.cos(x) == 0.0:
            raise DomainError("tan at a pole", node)
        return math.tan(x)
    if name == "exp":
        try:
            return math.exp(x)
        except OverflowError:
            raise DomainError("exp overflow", node) from None
    if name == "log":
        if x <= 0.0:
            raise DomainError("log of a non-positive number", node)
        return math.log(x)
    if name == "sqrt":
        if x < 0.0:
            raise DomainError("sqrt of a negative number", node)
        return math.sqrt(x)
    if name == "abs":
        return abs(x)
    raise ExprError(f"unknown function {name!r}")


def binding(layout: VarLayout | Sequence[str] | None, point, params: Mapping[str, float] | None) -> dict:
    env: dict[str, float] = dict(params or {})
    if layout is not None:
        names = layout.names if isinstance(layout, VarLayout) else tuple(layout)
        if len(point) != len(names):
            raise ValueError(f"point has {len(point)} entries, layout has {len(names)}")
        for n, x in zip(names, point):
            env[n] = float(x)
    return env


def evaluate(e: Expr, layout: VarLayout | Sequence[str] | None = None, point=(),
             params: Mapping[str, float] | None = None) -> float:
    """Evaluate ``e`` in real arithmetic.

    Layout names shadow parameters of the same name.
    """
    return eval_env(e, binding(layout, point, params))


def eval_env(e: Expr, env: Mapping[str, float]) -> float:
    k = e.kind
    if k == "const":
        return e.value
    if k in ("var", "param"):
        try:
            return env[e.name]
        except KeyError:
            raise UnboundIdentifier(e.name) from None
    if k == "unary":
        return -eval_env(e.children[0], env)
    if k == "binary":
        a = eval_env(e.children[0], env)
        b = eval_env(e.children[1], env)
        op = e.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if b == 0.0:
            raise DomainError("division by zero", e)
        return a / b
    if e.name == "pow":
        return real_pow(eval_env(e.children[0], env), eval_env(e.children[1], env), e)
    return _unary_fn(e.name, eval_env(e.children[0], env), e)


def parse_many(texts: Iterable[str], variables: Iterable[str] = ()) -> tuple[Expr, ...]:
    variables = tuple(variables)
    return tuple(parse(t, variables) for t in texts)
