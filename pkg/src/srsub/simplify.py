"""Canonical rewrite system for expression DAGs.

The rules: constant folding, identity elimination (x+0, x*1, x/1, x*0),
double-negation/inverse collapse, exp/log cancellation on valid domains, and
flattening plus canonical sorting of commutative +/- and */ chains with
pairwise cancellation of matching terms and factors.  Semantics are preserved
on the intersection of the input and output domains.  The rewrite is
idempotent: simplifying a canonical form returns it unchanged.
"""

from __future__ import annotations

import math

from .dag import (
    Binary,
    Const,
    DagBuilder,
    ExprDag,
    Unary,
    Var,
)

_UNARY_FOLD = {
    "sqrt": math.sqrt,
    "log": math.log,
    "exp": math.exp,
    "sin": math.sin,
    "cos": math.cos,
    "neg": lambda v: -v,
    "inv": lambda v: 1.0 / v,
    "square": lambda v: v * v,
}

_INVERSE_PAIRS = {("exp", "log"), ("log", "exp"), ("neg", "neg"),
                  ("inv", "inv"), ("square", "sqrt")}


def simplify(dag: ExprDag) -> ExprDag:
    """Return the canonical form of `dag` (bounded fixpoint iteration)."""
    current = dag
    for _ in range(4):
        nxt = _simplify_once(current)
        if nxt.key == current.key:
            return nxt
        current = nxt
    return current


def _simplify_once(dag: ExprDag) -> ExprDag:
    b = DagBuilder()
    memo: dict[int, int] = {}

    def rec(nid: int) -> int:
        if nid in memo:
            return memo[nid]
        node = dag.nodes[nid]
        if isinstance(node, Var):
            out = b.var(node.index)
        elif isinstance(node, Const):
            out = b.param(node.name or "c") if node.is_placeholder else b.const(node.value)
        elif isinstance(node, Unary):
            out = _unary(b, node.op, rec(node.child))
        else:
            left, right = rec(node.left), rec(node.right)
            if node.op in ("+", "-"):
                out = _rebuild_add(b, _collect_add(b, node.op, left, right))
            else:
                out = _rebuild_mul(b, _collect_mul(b, node.op, left, right))
        memo[nid] = out
        return out

    root = rec(dag.root)
    return b.extract(root, dag.arity)


def _unary(b: DagBuilder, op: str, child: int) -> int:
    node = b.nodes[child]
    if isinstance(node, Const) and not node.is_placeholder:
        try:
            value = _UNARY_FOLD[op](node.value)
        except (ValueError, ZeroDivisionError, OverflowError):
            value = None
        if value is not None and math.isfinite(value):
            return b.const(value)
        return b.unary(op, child)
    if isinstance(node, Unary) and (op, node.op) in _INVERSE_PAIRS:
        return node.child
    if op == "neg" and isinstance(node, Binary) and node.op == "-":
        return b.binary("-", node.right, node.left)
    if op == "inv" and isinstance(node, Binary) and node.op == "/":
        return b.binary("/", node.right, node.left)
    return b.unary(op, child)


# -- additive chains ---------------------------------------------------------


def _collect_add(b: DagBuilder, op: str, left: int, right: int):
    pos: list[int] = []
    neg: list[int] = []
    const = 0.0

    def walk(nid: int, sign: int) -> None:
        nonlocal const
        node = b.nodes[nid]
        if isinstance(node, Binary) and node.op == "+":
            walk(node.left, sign)
            walk(node.right, sign)
        elif isinstance(node, Binary) and node.op == "-":
            walk(node.left, sign)
            walk(node.right, -sign)
        elif isinstance(node, Unary) and node.op == "neg":
            walk(node.child, -sign)
        elif isinstance(node, Const) and not node.is_placeholder:
            const += sign * node.value
        else:
            (pos if sign > 0 else neg).append(nid)

    walk(left, 1)
    walk(right, 1 if op == "+" else -1)
    _cancel_pairs(b, pos, neg)
    return pos, neg, const


def _cancel_pairs(b: DagBuilder, first: list[int], second: list[int]) -> None:
    # remove items with matching structural keys pairwise across the lists
    i = 0
    while i < len(first):
        key = b.key(first[i])
        hit = next((j for j, nid in enumerate(second) if b.key(nid) == key), None)
        if hit is None:
            i += 1
        else:
            first.pop(i)
            second.pop(hit)


def _fold_chain(b: DagBuilder, op: str, items: list[int]) -> int:
    ordered = sorted(items, key=b.order_key)
    acc = ordered[-1]
    for nid in reversed(ordered[:-1]):
        acc = b.binary(op, nid, acc)
    return acc


def _rebuild_add(b: DagBuilder, collected) -> int:
    pos, neg, const = collected
    pos = list(pos)
    neg = list(neg)
    if const > 0.0:
        pos.append(b.const(const))
    elif const < 0.0:
        neg.append(b.const(-const))
    if not pos and not neg:
        return b.const(0.0)
    if not neg:
        return _fold_chain(b, "+", pos)
    if not pos:
        return b.unary("neg", _fold_chain(b, "+", neg))
    return b.binary("-", _fold_chain(b, "+", pos), _fold_chain(b, "+", neg))


# -- multiplicative chains ----------------------------------------------------


def _collect_mul(b: DagBuilder, op: str, left: int, right: int):
    num: list[int] = []
    den: list[int] = []
    state = {"cn": 1.0, "cd": 1.0, "sign": 1}

    def walk(nid: int, side: int) -> None:
        node = b.nodes[nid]
        if isinstance(node, Binary) and node.op == "*":
            walk(node.left, side)
            walk(node.right, side)
        elif isinstance(node, Binary) and node.op == "/":
            walk(node.left, side)
            walk(node.right, -side)
        elif isinstance(node, Unary) and node.op == "inv":
            walk(node.child, -side)
        elif isinstance(node, Unary) and node.op == "neg":
            state["sign"] = -state["sign"]
            walk(node.child, side)
        elif isinstance(node, Unary) and node.op == "square":
            walk(node.child, side)
            walk(node.child, side)
        elif isinstance(node, Const) and not node.is_placeholder:
            value = node.value
            if value < 0:
                state["sign"] = -state["sign"]
                value = -value
            if side > 0:
                state["cn"] *= value
            else:
                state["cd"] *= value
        else:
            (num if side > 0 else den).append(nid)

    walk(left, 1)
    walk(right, 1 if op == "*" else -1)
    _cancel_pairs(b, num, den)
    return num, den, state


def _rebuild_mul(b: DagBuilder, collected) -> int:
    num, den, state = collected
    num = list(num)
    den = list(den)
    cn, cd, sign = state["cn"], state["cd"], state["sign"]

    if cd == 0.0:
        den.append(b.const(0.0))
        cd = 1.0
    if cn == 0.0:
        return b.const(0.0)

    # fold the constant ratio onto one side of the bar
    if cd != 1.0 and cn != 1.0:
        cn, cd = cn / cd, 1.0
    if cn != 1.0:
        num.append(b.const(cn))
    elif cd != 1.0:
        den.append(b.const(cd))

    if num:
        num_tree = _fold_chain(b, "*", num)
    else:
        num_tree = None
    if den:
        den_tree = _fold_chain(b, "*", den)
        if num_tree is None:
            out = b.unary("inv", den_tree)
        else:
            out = b.binary("/", num_tree, den_tree)
    else:
        out = num_tree if num_tree is not None else b.const(1.0)
    return b.unary("neg", out) if sign < 0 else out


# -- derived measures ---------------------------------------------------------


def complexity(dag: ExprDag) -> int:
    """Node count of the simplified expression tree.

    Shared subexpressions count once per occurrence; derived operator nodes
    count as their written-out forms (square(a) as a*a, inv(a) as 1/a, neg as
    one unary-minus node) so the measure matches a plain binary expression
    tree.
    """
    s = simplify(dag)
    counts: list[int] = []
    for node in s.nodes:
        if isinstance(node, (Var, Const)):
            counts.append(1)
        elif isinstance(node, Unary):
            if node.op == "square":
                counts.append(1 + 2 * counts[node.child])
            elif node.op == "inv":
                counts.append(2 + counts[node.child])
            else:
                counts.append(1 + counts[node.child])
        else:
            counts.append(1 + counts[node.left] + counts[node.right])
    return counts[s.root]


def subexpressions(dag: ExprDag) -> set[ExprDag]:
    """Set of simplified subtrees of the simplified expression tree.

    Shared nodes yield one set element, matching set semantics.
    """
    s = simplify(dag)
    b = DagBuilder()
    root = b.copy_from(s)
    ids: set[int] = set()

    def visit(nid: int) -> None:
        if nid in ids:
            return
        ids.add(nid)
        node = b.nodes[nid]
        if isinstance(node, Unary):
            visit(node.child)
        elif isinstance(node, Binary):
            visit(node.left)
            visit(node.right)

    visit(root)
    return {b.extract(nid, s.arity) for nid in ids}
