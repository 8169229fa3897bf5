"""Expression DAGs: immutable node graphs with numeric evaluation and inversion.

Expressions are stored as directed acyclic graphs over variable, constant and
operator nodes.  Shared subexpressions are represented once (hash-consing in
the builder), commutative operands are ordered canonically, and every dag
carries a structural key so that two semantically identical constructions
compare equal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import NotSolvable

UNARY_OPS = ("sqrt", "log", "exp", "sin", "cos", "neg", "inv", "square")
BINARY_OPS = ("+", "-", "*", "/")
COMMUTATIVE_OPS = ("+", "*")


@dataclass(frozen=True)
class Var:
    index: int


@dataclass(frozen=True)
class Const:
    # value None marks a fitted-constant placeholder identified by `name`.
    value: float | None = None
    name: str | None = None

    @property
    def is_placeholder(self) -> bool:
        return self.value is None


@dataclass(frozen=True)
class Unary:
    op: str
    child: int


@dataclass(frozen=True)
class Binary:
    op: str
    left: int
    right: int


Node = Union[Var, Const, Unary, Binary]


def _const_repr(value: float) -> str:
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


class DagBuilder:
    """Hash-consing builder: equal subexpressions map to one node id.

    Commutative operands are ordered by (rank, structural key), and two
    local normalizations keep canonical forms tight: ``a*a`` becomes
    ``square(a)`` and ``1/b`` becomes ``inv(b)``.
    """

    def __init__(self) -> None:
        self.nodes: list[Node] = []
        self._keys: list[str] = []
        self._order: list[tuple[int, str]] = []
        self._index: dict[tuple, int] = {}

    def _intern(self, node: Node, key: str, rank: int) -> int:
        idx_key = (type(node).__name__, *node.__dict__.values())
        hit = self._index.get(idx_key)
        if hit is not None:
            return hit
        nid = len(self.nodes)
        self.nodes.append(node)
        self._keys.append(key)
        self._order.append((rank, key))
        self._index[idx_key] = nid
        return nid

    def key(self, nid: int) -> str:
        return self._keys[nid]

    def order_key(self, nid: int) -> tuple[int, str]:
        return self._order[nid]

    def var(self, index: int) -> int:
        if index < 0:
            raise ValueError("variable index must be >= 0")
        return self._intern(Var(index), f"V{index:03d}", 2)

    def const(self, value: float) -> int:
        value = float(value)
        if value == 0.0:  # collapse -0.0
            value = 0.0
        return self._intern(Const(value, None), f"C{_const_repr(value)}", 0)

    def param(self, name: str) -> int:
        return self._intern(Const(None, name), f"P{name}", 1)

    def unary(self, op: str, child: int) -> int:
        if op not in UNARY_OPS:
            raise ValueError(f"unknown unary op {op!r}")
        key = f"({op} {self._keys[child]})"
        return self._intern(Unary(op, child), key, 3)

    def binary(self, op: str, left: int, right: int) -> int:
        if op not in BINARY_OPS:
            raise ValueError(f"unknown binary op {op!r}")
        if op in COMMUTATIVE_OPS and self._order[right] < self._order[left]:
            left, right = right, left
        if op == "*" and left == right:
            return self.unary("square", left)
        if op == "/":
            lnode = self.nodes[left]
            if isinstance(lnode, Const) and lnode.value == 1.0:
                return self.unary("inv", right)
        key = f"({op} {self._keys[left]} {self._keys[right]})"
        return self._intern(Binary(op, left, right), key, 3)

    def copy_from(self, dag: "ExprDag", var_map: Sequence[int] | None = None) -> int:
        """Insert `dag` into this builder; optionally remap Var nodes to
        existing node ids of this builder. Returns the new root id."""
        memo: dict[int, int] = {}
        for nid, node in enumerate(dag.nodes):
            if isinstance(node, Var):
                if var_map is not None:
                    memo[nid] = var_map[node.index]
                else:
                    memo[nid] = self.var(node.index)
            elif isinstance(node, Const):
                if node.is_placeholder:
                    memo[nid] = self.param(node.name or "c")
                else:
                    memo[nid] = self.const(node.value)
            elif isinstance(node, Unary):
                memo[nid] = self.unary(node.op, memo[node.child])
            else:
                memo[nid] = self.binary(node.op, memo[node.left], memo[node.right])
        return memo[dag.root]

    def extract(self, root: int, arity: int) -> "ExprDag":
        """Snapshot the subgraph reachable from `root` as an ExprDag."""
        reach: list[int] = []
        seen = set()

        def visit(nid: int) -> None:
            if nid in seen:
                return
            seen.add(nid)
            node = self.nodes[nid]
            if isinstance(node, Unary):
                visit(node.child)
            elif isinstance(node, Binary):
                visit(node.left)
                visit(node.right)
            reach.append(nid)

        visit(root)
        remap = {old: new for new, old in enumerate(reach)}
        out: list[Node] = []
        for old in reach:
            node = self.nodes[old]
            if isinstance(node, Unary):
                node = Unary(node.op, remap[node.child])
            elif isinstance(node, Binary):
                node = Binary(node.op, remap[node.left], remap[node.right])
            out.append(node)
        return ExprDag(tuple(out), remap[root], arity, self._keys[root])


@dataclass(frozen=True)
class ExprDag:
    """Immutable expression DAG.

    nodes are stored in topological order (children precede parents), `root`
    indexes the output node and `arity` is the declared input dimension.
    """

    nodes: tuple[Node, ...]
    root: int
    arity: int
    key: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        if not self.key:
            object.__setattr__(self, "key", _structural_key(self.nodes, self.root))
        for node in self.nodes:
            if isinstance(node, Var) and not 0 <= node.index < self.arity:
                raise ValueError(
                    f"variable index {node.index} outside declared arity {self.arity}"
                )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ExprDag):
            return NotImplemented
        return self.arity == other.arity and self.key == other.key

    def __hash__(self) -> int:
        return hash((self.arity, self.key))

    def __repr__(self) -> str:
        from .exprtext import to_text

        return f"ExprDag({to_text(self)!r}, arity={self.arity})"

    # -- structural queries -------------------------------------------------

    def var_indices(self) -> set[int]:
        return {n.index for n in self.nodes if isinstance(n, Var)}

    def placeholders(self) -> list[str]:
        names = []
        for n in self.nodes:
            if isinstance(n, Const) and n.is_placeholder and n.name not in names:
                names.append(n.name)
        return names

    def op_count(self) -> int:
        return sum(1 for n in self.nodes if isinstance(n, (Unary, Binary)))

    def tree_size(self) -> int:
        """Node count of the unrolled expression tree (shared nodes counted
        once per occurrence)."""
        counts = _per_occurrence(self.nodes, lambda node: 1)
        return counts[self.root]

    def var_tree_occurrences(self, index: int) -> int:
        counts = _per_occurrence(
            self.nodes,
            lambda node: 1 if isinstance(node, Var) and node.index == index else 0,
        )
        return counts[self.root]


def _structural_key(nodes: tuple[Node, ...], root: int) -> str:
    keys: list[str] = []
    for node in nodes:
        if isinstance(node, Var):
            keys.append(f"V{node.index:03d}")
        elif isinstance(node, Const):
            keys.append(f"P{node.name}" if node.is_placeholder else f"C{_const_repr(node.value)}")
        elif isinstance(node, Unary):
            keys.append(f"({node.op} {keys[node.child]})")
        else:
            keys.append(f"({node.op} {keys[node.left]} {keys[node.right]})")
    return keys[root]


def _per_occurrence(nodes: tuple[Node, ...], leaf_fn) -> list[int]:
    # Per-occurrence DP: a shared node's total enters once per parent edge.
    counts: list[int] = []
    for node in nodes:
        own = leaf_fn(node)
        if isinstance(node, Unary):
            counts.append(own + counts[node.child])
        elif isinstance(node, Binary):
            counts.append(own + counts[node.left] + counts[node.right])
        else:
            counts.append(own)
    return counts


# -- construction helpers ---------------------------------------------------


def from_builder(builder: DagBuilder, root: int, arity: int) -> ExprDag:
    return builder.extract(root, arity)


def variable(index: int, arity: int | None = None) -> ExprDag:
    b = DagBuilder()
    return b.extract(b.var(index), arity if arity is not None else index + 1)


def constant(value: float, arity: int = 0) -> ExprDag:
    b = DagBuilder()
    return b.extract(b.const(value), arity)


def compose(dag: ExprDag, replacements: Sequence[ExprDag], arity: int) -> ExprDag:
    """Substitute `replacements[i]` for Var(i); the result has `arity` inputs."""
    if len(replacements) < dag.arity:
        needed = dag.var_indices()
        if needed and max(needed) >= len(replacements):
            raise ValueError("not enough replacement expressions")
    b = DagBuilder()
    roots = [b.copy_from(r) for r in replacements]
    out = b.copy_from(dag, var_map=roots)
    return b.extract(out, arity)


def rename_vars(dag: ExprDag, mapping: dict[int, int], arity: int) -> ExprDag:
    b = DagBuilder()
    memo: dict[int, int] = {}
    for nid, node in enumerate(dag.nodes):
        if isinstance(node, Var):
            memo[nid] = b.var(mapping.get(node.index, node.index))
        elif isinstance(node, Const):
            memo[nid] = b.param(node.name or "c") if node.is_placeholder else b.const(node.value)
        elif isinstance(node, Unary):
            memo[nid] = b.unary(node.op, memo[node.child])
        else:
            memo[nid] = b.binary(node.op, memo[node.left], memo[node.right])
    return b.extract(memo[dag.root], arity)


def bind_placeholders(dag: ExprDag, values: dict[str, float]) -> ExprDag:
    b = DagBuilder()
    memo: dict[int, int] = {}
    for nid, node in enumerate(dag.nodes):
        if isinstance(node, Var):
            memo[nid] = b.var(node.index)
        elif isinstance(node, Const):
            if node.is_placeholder and node.name in values:
                memo[nid] = b.const(values[node.name])
            elif node.is_placeholder:
                memo[nid] = b.param(node.name or "c")
            else:
                memo[nid] = b.const(node.value)
        elif isinstance(node, Unary):
            memo[nid] = b.unary(node.op, memo[node.child])
        else:
            memo[nid] = b.binary(node.op, memo[node.left], memo[node.right])
    return b.extract(memo[dag.root], dag.arity)


# -- numeric evaluation -----------------------------------------------------

_OVERFLOW_GUARD = 1e150


def evaluate(dag: ExprDag, X: np.ndarray, params: dict[str, float] | None = None) -> np.ndarray:
    """Elementwise evaluation on an (n, d) matrix.

    Domain violations (log of non-positives, division by zero, sqrt of a
    negative, overflow) yield non-finite entries; they never raise.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] < dag.arity:
        raise ValueError(f"dag arity {dag.arity} exceeds data dimension {X.shape[1]}")
    n = X.shape[0]
    vals: list[np.ndarray] = []
    with np.errstate(all="ignore"):
        for node in dag.nodes:
            if isinstance(node, Var):
                vals.append(X[:, node.index])
            elif isinstance(node, Const):
                if node.is_placeholder:
                    if params is None or node.name not in params:
                        raise ValueError(f"unbound placeholder {node.name!r}")
                    v = params[node.name]
                else:
                    v = node.value
                vals.append(np.full(n, v))
            elif isinstance(node, Unary):
                c = vals[node.child]
                if node.op == "sqrt":
                    vals.append(np.sqrt(c))
                elif node.op == "log":
                    out = np.log(np.where(c > 0, c, np.nan))
                    vals.append(out)
                elif node.op == "exp":
                    vals.append(np.exp(c))
                elif node.op == "sin":
                    vals.append(np.sin(c))
                elif node.op == "cos":
                    vals.append(np.cos(c))
                elif node.op == "neg":
                    vals.append(-c)
                elif node.op == "inv":
                    vals.append(np.where(c != 0, 1.0 / np.where(c != 0, c, 1.0), np.inf))
                else:  # square
                    vals.append(c * c)
            else:
                l, r = vals[node.left], vals[node.right]
                if node.op == "+":
                    vals.append(l + r)
                elif node.op == "-":
                    vals.append(l - r)
                elif node.op == "*":
                    vals.append(l * r)
                else:
                    vals.append(np.where(r != 0, l / np.where(r != 0, r, 1.0), np.nan))
    out = np.array(vals[dag.root], dtype=float, copy=True)
    out[~np.isfinite(out)] = np.nan
    out[np.abs(out) > _OVERFLOW_GUARD] = np.nan
    return out


def evaluate_at(dag: ExprDag, row: Sequence[float], params: dict[str, float] | None = None) -> float:
    return float(evaluate(dag, np.asarray(row, dtype=float)[None, :], params)[0])


# -- equation solving by path inversion -------------------------------------

_INVERTIBLE_UNARY = {"sqrt", "log", "exp", "neg", "inv", "square"}


def invertible_path(dag: ExprDag, target: int) -> bool:
    """True when `target` occurs exactly once and every operator on the path
    from that occurrence to the root is invertible."""
    if dag.var_tree_occurrences(target) != 1:
        return False
    contains = _per_occurrence(
        dag.nodes,
        lambda node: 1 if isinstance(node, Var) and node.index == target else 0,
    )
    nid = dag.root
    while True:
        node = dag.nodes[nid]
        if isinstance(node, Var):
            return node.index == target
        if isinstance(node, Const):
            return False
        if isinstance(node, Unary):
            if node.op not in _INVERTIBLE_UNARY:
                return False
            nid = node.child
        else:
            nid = node.left if contains[node.left] else node.right


def solve_for(lhs: ExprDag, rhs: ExprDag, target: int, check: bool = True,
              rng: np.random.Generator | None = None) -> ExprDag:
    """Solve lhs(x) = rhs(x) for variable `target`.

    The target must occur exactly once across both sides and every operator
    on the path from that occurrence to its root must be invertible
    (+, -, *, / with the target on either side; sqrt, log, exp, neg, inv,
    and square on its non-negative branch).  Raises NotSolvable otherwise.
    """
    arity = max(lhs.arity, rhs.arity)
    occ_l = lhs.var_tree_occurrences(target)
    occ_r = rhs.var_tree_occurrences(target)
    if occ_l + occ_r != 1:
        raise NotSolvable(f"target x{target + 1} occurs {occ_l + occ_r} times")
    if occ_r == 1:
        lhs, rhs = rhs, lhs

    b = DagBuilder()
    side = b.copy_from(lhs)
    acc = b.copy_from(rhs)
    constraints: list[int] = []  # node ids that must be >= 0 for the branch

    def contains(nid: int) -> bool:
        node = b.nodes[nid]
        if isinstance(node, Var):
            return node.index == target
        if isinstance(node, Unary):
            return contains(node.child)
        if isinstance(node, Binary):
            return contains(node.left) or contains(node.right)
        return False

    while True:
        node = b.nodes[side]
        if isinstance(node, Var) and node.index == target:
            break
        if isinstance(node, Unary):
            if node.op not in _INVERTIBLE_UNARY:
                raise NotSolvable(f"operator {node.op!r} on the path is not invertible")
            if node.op == "sqrt":
                constraints.append(acc)
                acc = b.unary("square", acc)
            elif node.op == "log":
                acc = b.unary("exp", acc)
            elif node.op == "exp":
                acc = b.unary("log", acc)
            elif node.op == "neg":
                acc = b.unary("neg", acc)
            elif node.op == "inv":
                acc = b.unary("inv", acc)
            else:  # square: non-negative branch
                acc = b.unary("sqrt", acc)
            side = node.child
        elif isinstance(node, Binary):
            in_left = contains(node.left)
            other = node.right if in_left else node.left
            if node.op == "+":
                acc = b.binary("-", acc, other)
            elif node.op == "-":
                acc = b.binary("+", acc, other) if in_left else b.binary("-", other, acc)
            elif node.op == "*":
                acc = b.binary("/", acc, other)
            else:
                acc = b.binary("*", acc, other) if in_left else b.binary("/", other, acc)
            side = node.left if in_left else node.right
        else:
            raise NotSolvable("path ended before reaching the target variable")

    solution = b.extract(acc, arity)
    if check:
        _check_solution(lhs, rhs, target, solution,
                        [b.extract(c, arity) for c in constraints], rng)
    return solution


def _check_solution(lhs: ExprDag, rhs: ExprDag, target: int, solution: ExprDag,
                    constraints: list[ExprDag], rng: np.random.Generator | None,
                    n_points: int = 100, tol: float = 1e-9) -> None:
    rng = rng if rng is not None else np.random.default_rng(0)
    arity = max(lhs.arity, rhs.arity)
    passed = 0
    attempts = 0
    c = 1.0
    while passed < n_points and attempts < 40:
        attempts += 1
        pts = rng.uniform(-c, c, size=(max(4 * n_points, 64), arity))
        sol = evaluate(solution, pts)
        mask = np.isfinite(sol)
        for con in constraints:
            cv = evaluate(con, pts)
            mask &= np.isfinite(cv) & (cv >= 0)
        if not mask.any():
            c += 0.5
            continue
        pts = pts[mask]
        pts[:, target] = sol[mask]
        lv = evaluate(lhs, pts)
        rv = evaluate(rhs, pts)
        ok = np.isfinite(lv) & np.isfinite(rv)
        if not ok.any():
            c += 0.5
            continue
        resid = np.abs(lv[ok] - rv[ok])
        scale = 1.0 + np.maximum(np.abs(lv[ok]), np.abs(rv[ok]))
        if np.any(resid > tol * scale):
            raise NotSolvable("solution failed the randomized residual check")
        passed += int(ok.sum())
        c += 0.5
    if passed == 0:
        raise NotSolvable("no valid sample points for the residual check")
