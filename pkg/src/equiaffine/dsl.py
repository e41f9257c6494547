"""Surface definition language (``.srf`` files).

Grammar (whitespace-insensitive, ``#`` starts a comment)::

    surface := "surface" IDENT "{" domain? consts? exclude* comp comp comp comp "}"
    domain  := "domain" "u" "in" "[" NUM "," NUM "]" "v" "in" "[" NUM "," NUM "]"
    consts  := ("const" IDENT "=" NUM)*
    exclude := "exclude" "(" NUM "," NUM ")"
    comp    := "x" INT "=" expr ";"            # INT in 1..4, each exactly once
    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | power
    power   := atom ("^" ["-"] INT | "^" "(" ["-"] INT ")")?
    atom    := NUM | IDENT | FN "(" expr ")" | "(" expr ")"

Header clauses (``domain``, ``const``, ``exclude``) may end in an optional
``;``.  Signed numbers are accepted in ``domain``, ``const`` and ``exclude``.  A minus
sign written directly in front of a numeric literal folds into the literal,
so ``-2`` parses to ``Num(-2.0)`` while ``-(2)`` stays ``Neg(Num(2.0))``; the
canonical printer relies on this to round-trip exactly.  The unicode minus
sign U+2212 is read as ``-``.  Named constants are folded into numbers at
parse time.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import jets
from .jets import DomainError, Jet, jet_variable

FUNCTIONS = ("sin", "cos", "exp", "log", "sinh", "cosh", "sqrt")
DEFAULT_DOMAIN = (-1.0, 1.0, -1.0, 1.0)


class DslError(ValueError):
    pass


class ParseError(DslError):
    def __init__(self, message: str, line: int, column: int, expected=()):
        self.line = line
        self.column = column
        self.expected = tuple(sorted(expected))
        exp = f" (expected one of: {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{line}:{column}: {message}{exp}")


class ArityError(ParseError):
    pass


class UnknownFunction(ParseError):
    pass


class MissingComponent(DslError):
    def __init__(self, index: int):
        self.index = index
        super().__init__(f"missing component x{index}")


class OutOfDomain(DslError):
    pass


# -- AST ----------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str  # "u" or "v"


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Expr"


Expr = Num | Var | Neg | BinOp | Pow | Call


@dataclass(frozen=True)
class SurfaceChart:
    name: str
    components: tuple[Expr, Expr, Expr, Expr]
    domain: tuple[float, float, float, float] = DEFAULT_DOMAIN
    constants: tuple[tuple[str, float], ...] = ()
    excluded_points: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if len(self.components) != 4:
            raise DslError("a surface chart needs exactly 4 components")
        u0, u1, v0, v1 = self.domain
        if not (u0 < u1 and v0 < v1):
            raise DslError(f"empty domain {self.domain}")

    def contains(self, u: float, v: float) -> bool:
        u0, u1, v0, v1 = self.domain
        return u0 <= u <= u1 and v0 <= v <= v1

    def is_excluded(self, u: float, v: float, tol: float = 1e-12) -> bool:
        return any(abs(u - a) <= tol and abs(v - b) <= tol for a, b in self.excluded_points)


# -- tokenizer ------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+|\#[^\n]*)
  | (?P<nl>\n)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(){}\[\],;=])
    """,
    re.VERBOSE,
)


@dataclass
class Token:
    kind: str  # "num", "ident", "op", "eof"
    text: str
    line: int
    column: int


def tokenize(text: str) -> list[Token]:
    text = text.replace("−", "-")
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind != "ws":
            tokens.append(Token(kind, m.group(), line, m.start() - line_start + 1))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# -- parser -----------------------------------------------------------------------


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.pos = 0
        self.constants: dict[str, float] = {}

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def error(self, message: str, expected=(), cls=ParseError, tok: Token | None = None):
        tok = tok or self.tok
        return cls(message, tok.line, tok.column, expected)

    def accept(self, text: str) -> bool:
        if self.tok.kind in ("op", "ident") and self.tok.text == text:
            self.pos += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        tok = self.tok
        if not self.accept(text):
            found = tok.text or "end of input"
            raise self.error(f"unexpected {found!r}", {repr(text)})
        return tok

    def expect_kind(self, kind: str, what: str) -> Token:
        tok = self.tok
        if tok.kind != kind:
            raise self.error(f"unexpected {tok.text or 'end of input'!r}", {what})
        self.pos += 1
        return tok

    def signed_number(self) -> float:
        sign = -1.0 if self.accept("-") else 1.0
        return sign * float(self.expect_kind("num", "NUM").text)

    # surface level

    def surface(self) -> SurfaceChart:
        self.expect("surface")
        name = self.expect_kind("ident", "IDENT").text
        self.expect("{")
        domain = DEFAULT_DOMAIN
        if self.accept("domain"):
            domain = self.domain()
            self.accept(";")
        while self.accept("const"):
            tok = self.expect_kind("ident", "IDENT")
            if tok.text in ("u", "v") or tok.text in FUNCTIONS:
                raise self.error(f"cannot redefine {tok.text!r}", tok=tok)
            self.expect("=")
            self.constants[tok.text] = self.signed_number()
            self.accept(";")
        excluded = []
        while self.accept("exclude"):
            self.expect("(")
            a = self.signed_number()
            self.expect(",")
            b = self.signed_number()
            self.expect(")")
            self.accept(";")
            excluded.append((a, b))
        comps: dict[int, Expr] = {}
        while not self.accept("}"):
            tok = self.tok
            m = re.fullmatch(r"x([1-4])", tok.text) if tok.kind == "ident" else None
            if m is None:
                raise self.error(
                    f"unexpected {tok.text or 'end of input'!r}",
                    {"x1", "x2", "x3", "x4", "'}'"},
                )
            index = int(m.group(1))
            if index in comps:
                raise self.error(f"duplicate component x{index}")
            self.pos += 1
            self.expect("=")
            comps[index] = self.expr()
            self.expect(";")
        if self.tok.kind != "eof":
            raise self.error(f"trailing input {self.tok.text!r}", {"end of input"})
        for i in range(1, 5):
            if i not in comps:
                raise MissingComponent(i)
        try:
            return SurfaceChart(
                name=name,
                components=tuple(comps[i] for i in range(1, 5)),
                domain=domain,
                constants=tuple(self.constants.items()),
                excluded_points=tuple(excluded),
            )
        except DslError as exc:
            raise self.error(str(exc)) from None

    def domain(self) -> tuple[float, float, float, float]:
        bounds = []
        for var in ("u", "v"):
            self.expect(var)
            self.expect("in")
            self.expect("[")
            lo = self.signed_number()
            self.expect(",")
            hi = self.signed_number()
            self.expect("]")
            bounds += [lo, hi]
        return tuple(bounds)

    # expressions

    def expr(self) -> Expr:
        node = self.term()
        while self.tok.text in ("+", "-") and self.tok.kind == "op":
            op = self.tok.text
            self.pos += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.tok.text in ("*", "/") and self.tok.kind == "op":
            op = self.tok.text
            self.pos += 1
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.accept("-"):
            literal = self.tok.kind == "num"
            operand = self.unary()
            if literal and isinstance(operand, Num):
                return Num(-operand.value)
            return Neg(operand)
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.accept("^"):
            paren = self.accept("(")
            sign = -1 if self.accept("-") else 1
            tok = self.tok
            if tok.kind != "num" or not re.fullmatch(r"\d+", tok.text):
                raise self.error("exponent must be an integer literal", {"INT"})
            self.pos += 1
            if paren:
                self.expect(")")
            return Pow(base, sign * int(tok.text))
        return base

    def atom(self) -> Expr:
        tok = self.tok
        if tok.kind == "num":
            self.pos += 1
            return Num(float(tok.text))
        if tok.kind == "ident":
            self.pos += 1
            if self.tok.text == "(" and self.tok.kind == "op":
                return self.call(tok)
            if tok.text in ("u", "v"):
                return Var(tok.text)
            if tok.text in self.constants:
                return Num(self.constants[tok.text])
            if tok.text in FUNCTIONS:
                raise self.error(f"function {tok.text!r} needs an argument", {"'('"})
            raise self.error(f"unknown identifier {tok.text!r}", tok=tok)
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        raise self.error(
            f"unexpected {tok.text or 'end of input'!r}", {"NUM", "IDENT", "'('", "'-'"}
        )

    def call(self, name: Token) -> Expr:
        if name.text not in FUNCTIONS:
            raise self.error(f"unknown function {name.text!r}", FUNCTIONS, UnknownFunction, name)
        self.expect("(")
        if self.tok.text == ")":
            raise self.error(f"{name.text} takes exactly one argument", cls=ArityError)
        arg = self.expr()
        if self.tok.text == ",":
            raise self.error(f"{name.text} takes exactly one argument", cls=ArityError)
        self.expect(")")
        return Call(name.text, arg)


def parse_surface(text: str) -> SurfaceChart:
    """Parse ``.srf`` source into a :class:`SurfaceChart`."""
    return _Parser(text).surface()


def parse_expr(text: str, constants: dict[str, float] | None = None) -> Expr:
    p = _Parser(text)
    p.constants = dict(constants or {})
    node = p.expr()
    if p.tok.kind != "eof":
        raise p.error(f"trailing input {p.tok.text!r}", {"end of input"})
    return node


def load_surface(path) -> SurfaceChart:
    return parse_surface(Path(path).read_text(encoding="utf-8"))


# -- canonical printer ----------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _prec(node: Expr) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return 3
    if isinstance(node, Pow):
        return 4
    if isinstance(node, Num) and (node.value < 0 or math.copysign(1.0, node.value) < 0):
        return 0  # always parenthesized
    return 5


def _fmt_num(x: float) -> str:
    return repr(float(x))


def format_expr(node: Expr) -> str:
    def wrap(child: Expr, minimum: int) -> str:
        s = format_expr(child)
        return f"({s})" if _prec(child) < minimum else s

    if isinstance(node, Num):
        return _fmt_num(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        if isinstance(node.operand, Num):
            return f"-({format_expr(node.operand)})"
        return "-" + wrap(node.operand, 3)
    if isinstance(node, BinOp):
        p = _PREC[node.op]
        return f"{wrap(node.left, p)} {node.op} {wrap(node.right, p + 1)}"
    if isinstance(node, Pow):
        return f"{wrap(node.base, 5)}^{node.exponent}" if node.exponent >= 0 else (
            f"{wrap(node.base, 5)}^(-{-node.exponent})"
        )
    if isinstance(node, Call):
        return f"{node.fn}({format_expr(node.arg)})"
    raise TypeError(f"not an expression node: {node!r}")


def format_surface(chart: SurfaceChart) -> str:
    u0, u1, v0, v1 = chart.domain
    lines = [f"surface {chart.name} {{"]
    lines.append(
        f"  domain u in [{_fmt_num(u0)}, {_fmt_num(u1)}] v in [{_fmt_num(v0)}, {_fmt_num(v1)}]"
    )
    for name, value in chart.constants:
        lines.append(f"  const {name} = {_fmt_num(value)};")
    for a, b in chart.excluded_points:
        lines.append(f"  exclude ({_fmt_num(a)}, {_fmt_num(b)});")
    for i, comp in enumerate(chart.components, start=1):
        lines.append(f"  x{i} = {format_expr(comp)};")
    lines.append("}")
    return "\n".join(lines) + "\n"


# -- evaluation -----------------------------------------------------------------


def eval_jet(node: Expr, u: Jet, v: Jet) -> Jet:
    if isinstance(node, Num):
        return Jet.constant(node.value, u.order)
    if isinstance(node, Var):
        return u if node.name == "u" else v
    if isinstance(node, Neg):
        return -eval_jet(node.operand, u, v)
    if isinstance(node, BinOp):
        a, b = eval_jet(node.left, u, v), eval_jet(node.right, u, v)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        return a / b
    if isinstance(node, Pow):
        return jets.int_power(eval_jet(node.base, u, v), node.exponent)
    if isinstance(node, Call):
        return jets.ELEMENTARY[node.fn](eval_jet(node.arg, u, v))
    raise TypeError(f"not an expression node: {node!r}")


def eval_component_jets(chart: SurfaceChart, point, order: int, strict: bool = True) -> list[Jet]:
    """Scalar jets of x1..x4 at ``point``; jet domain errors carry the component index.

    With ``strict=False`` the chart's parameter box is not enforced (excluded
    points still are).
    """
    u0, v0 = map(float, point)
    if strict and not chart.contains(u0, v0):
        raise OutOfDomain(f"point {(u0, v0)} outside domain {chart.domain}")
    if chart.is_excluded(u0, v0):
        raise OutOfDomain(f"point {(u0, v0)} is an excluded point of {chart.name}")
    u, v = jet_variable("u", u0, order), jet_variable("v", v0, order)
    out = []
    for i, comp in enumerate(chart.components, start=1):
        try:
            out.append(eval_jet(comp, u, v))
        except DomainError as exc:
            raise DomainError(exc.fn, exc.value, component=i) from exc
        except jets.DivisionByZeroJet as exc:
            raise DomainError("division", exc.value, component=i) from exc
    return out


def immersion_jet(chart: SurfaceChart, point, order: int, strict: bool = True) -> Jet:
    """The immersion as one vector-valued jet of shape (4,)."""
    return jets.stack(eval_component_jets(chart, point, order, strict=strict))


_FLOAT_FNS = {name: getattr(np, name) for name in FUNCTIONS}


def eval_float(node: Expr, u, v, fns=None):
    """Plain evaluation; ``fns`` swaps in another numeric library (e.g. mpmath)."""
    fns = fns or _FLOAT_FNS
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return u if node.name == "u" else v
    if isinstance(node, Neg):
        return -eval_float(node.operand, u, v, fns)
    if isinstance(node, BinOp):
        a, b = eval_float(node.left, u, v, fns), eval_float(node.right, u, v, fns)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        return a / b
    if isinstance(node, Pow):
        return eval_float(node.base, u, v, fns) ** node.exponent
    if isinstance(node, Call):
        return fns[node.fn](eval_float(node.arg, u, v, fns))
    raise TypeError(f"not an expression node: {node!r}")


def free_variables(node: Expr) -> set[str]:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Num):
        return set()
    if isinstance(node, (Neg, Call)):
        return free_variables(node.operand if isinstance(node, Neg) else node.arg)
    if isinstance(node, Pow):
        return free_variables(node.base)
    return free_variables(node.left) | free_variables(node.right)
