"""Infix text format for expression DAGs.

Variables are written ``x1..xd``, the functions ``sqrt, log, exp, sin, cos``
are supported together with ``+ - * /`` and parentheses.  Integer powers via
``^``/``**`` and placeholder constants ``c0, c1, ...`` are accepted on input
for robustness; printing stays within the core operator set.
"""

from __future__ import annotations

import re

from .dag import Const, DagBuilder, ExprDag, Unary, Var
from .errors import UnsupportedExpression

_FUNCTIONS = ("sqrt", "log", "exp", "sin", "cos")

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[()+\-*/^]))"
)


def _tokenize(text: str) -> list[str]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            raise UnsupportedExpression(f"cannot tokenize {text[pos:pos + 12]!r}")
        tokens.append(m.group(m.lastgroup))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, tokens: list[str], builder: DagBuilder,
                 var_names: dict[str, int] | None):
        self.tokens = tokens
        self.pos = 0
        self.b = builder
        self.var_names = var_names or {}
        self.max_index = -1

    def peek(self) -> str | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self) -> str:
        tok = self.peek()
        if tok is None:
            raise UnsupportedExpression("unexpected end of expression")
        self.pos += 1
        return tok

    def expect(self, tok: str) -> None:
        got = self.take()
        if got != tok:
            raise UnsupportedExpression(f"expected {tok!r}, got {got!r}")

    def parse(self) -> int:
        node = self.expr()
        if self.peek() is not None:
            raise UnsupportedExpression(f"trailing input at {self.peek()!r}")
        return node

    def expr(self) -> int:
        node = self.term()
        while self.peek() in ("+", "-"):
            op = self.take()
            node = self.b.binary(op, node, self.term())
        return node

    def term(self) -> int:
        node = self.power()
        while self.peek() in ("*", "/"):
            op = self.take()
            node = self.b.binary(op, node, self.power())
        return node

    def power(self) -> int:
        base = self.factor()
        if self.peek() in ("^", "**"):
            self.take()
            neg = False
            tok = self.take()
            if tok == "-":
                neg = True
                tok = self.take()
            try:
                exp = int(tok)
            except ValueError:
                raise UnsupportedExpression(f"only integer exponents supported, got {tok!r}")
            node = self._int_power(base, exp)
            return self.b.unary("inv", node) if neg else node
        return base

    def _int_power(self, base: int, exp: int) -> int:
        if exp < 0:
            return self.b.unary("inv", self._int_power(base, -exp))
        if exp == 0:
            return self.b.const(1.0)
        if exp == 1:
            return base
        half = self._int_power(base, exp // 2)
        sq = self.b.unary("square", half)
        return sq if exp % 2 == 0 else self.b.binary("*", base, sq)

    def factor(self) -> int:
        tok = self.take()
        if tok == "-":
            inner = self.factor()
            node = self.b.nodes[inner]
            if isinstance(node, Const) and not node.is_placeholder:
                return self.b.const(-node.value)
            return self.b.unary("neg", inner)
        if tok == "+":
            return self.factor()
        if tok == "(":
            node = self.expr()
            self.expect(")")
            return node
        if tok in _FUNCTIONS:
            self.expect("(")
            node = self.expr()
            self.expect(")")
            return self.b.unary(tok, node)
        if re.fullmatch(r"x\d+", tok):
            index = int(tok[1:]) - 1
            if index < 0:
                raise UnsupportedExpression("variables are numbered from x1")
            self.max_index = max(self.max_index, index)
            return self.b.var(index)
        if re.fullmatch(r"c\d+", tok):
            return self.b.param(tok)
        if tok in self.var_names:
            index = self.var_names[tok]
            self.max_index = max(self.max_index, index)
            return self.b.var(index)
        try:
            return self.b.const(float(tok))
        except ValueError:
            raise UnsupportedExpression(f"unknown identifier {tok!r}")


def parse(text: str, arity: int | None = None,
          var_names: dict[str, int] | None = None) -> ExprDag:
    """Parse infix text into an ExprDag.

    `arity` overrides the inferred input dimension (max variable index).
    `var_names` maps extra identifiers (e.g. ``{"y": 3}``) to variable slots.
    """
    builder = DagBuilder()
    parser = _Parser(_tokenize(text), builder, var_names)
    root = parser.parse()
    inferred = parser.max_index + 1
    if arity is None:
        arity = inferred
    elif arity < inferred:
        raise UnsupportedExpression(f"arity {arity} below used variables ({inferred})")
    return builder.extract(root, arity)


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def to_text(dag: ExprDag, var_names: dict[int, str] | None = None) -> str:
    """Render a dag as infix text; parse(to_text(e)) is structurally e."""
    names = var_names or {}

    def render(nid: int) -> tuple[str, int]:
        # returns (text, precedence); atoms get precedence 9
        node = dag.nodes[nid]
        if isinstance(node, Var):
            return names.get(node.index, f"x{node.index + 1}"), 9
        if isinstance(node, Const):
            if node.is_placeholder:
                return node.name or "c0", 9
            v = node.value
            if v < 0:
                return f"-{_fmt(-v)}", 0
            return _fmt(v), 9
        if isinstance(node, Unary):
            inner, _ = render(node.child)
            if node.op in _FUNCTIONS:
                return f"{node.op}({inner})", 9
            if node.op == "neg":
                return f"-({inner})", 0
            if node.op == "inv":
                return f"1/({inner})", 2
            # square: stay within + - * / by rendering explicit multiplication
            return f"(({inner})*({inner}))", 9
        text_l, prec_l = render(node.left)
        text_r, prec_r = render(node.right)
        prec = _PREC[node.op]
        if prec_l < prec:
            text_l = f"({text_l})"
        # parenthesize an equal-precedence right child so the left-associative
        # parser rebuilds the same tree
        if prec_r <= prec:
            text_r = f"({text_r})"
        return f"{text_l}{node.op}{text_r}", prec

    text, _ = render(dag.root)
    return text


def _fmt(value: float) -> str:
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return repr(value)
