"""Candidate substitutions: generation, dataset transforms, and verification.

An input substitution replaces a set of input columns by one derived column
g(x_I); an out-input substitution replaces the output column by h(x_I, y) and
drops the columns in I.  Datasets track, for every current column and for the
current output, the expression over the original coordinates that produced
it, so solutions of reduced problems can be translated back.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Iterator, Sequence

import numpy as np
import sympy as sp

from . import symbolic
from .dag import ExprDag, compose, evaluate, invertible_path, solve_for, variable
from .errors import Inconclusive, NotSolvable, TooFewRows, Unverifiable
from .exprtext import parse
from .grammar import GrammarBudget, enumerate_dags
from .simplify import simplify

MAX_ROW_DROP_FRACTION = 0.2
NEAR_CONSTANT_REL_STD = 1e-10
CANDIDATE_CAP = 50_000


@dataclass(frozen=True)
class InputSub:
    """Replace columns I by the single derived column g(x_I)."""

    g: ExprDag
    I: tuple[int, ...]
    k: int = 1

    def __post_init__(self) -> None:
        if len(self.I) < 2:
            raise ValueError("input substitutions need |I| > 1")
        if self.g.arity != len(self.I):
            raise ValueError("g arity must equal |I|")
        if self.k != 1:
            raise ValueError("only scalar substitutions (k = 1) are supported")


@dataclass(frozen=True)
class OutInputSub:
    """Replace the output by h(x_I, y) and drop the columns in I.

    h takes |I| + 1 inputs; the last slot is the current output.
    """

    h: ExprDag
    I: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.I) < 1:
            raise ValueError("out-input substitutions need |I| >= 1")
        if self.h.arity != len(self.I) + 1:
            raise ValueError("h arity must equal |I| + 1")
        if not invertible_path(self.h, len(self.I)):
            raise ValueError("output slot must occur once on an invertible path")


Substitution = InputSub | OutInputSub


@dataclass
class Dataset:
    """Observation matrix with provenance back to the original coordinates.

    var_map[i] describes column i as an expression over the original inputs;
    y_map describes the current output over the original inputs plus the
    original output in its last slot.  origin_X/origin_y hold the original
    coordinates of the surviving rows, origin_rows their row indices in the
    problem's full sample.
    """

    X: np.ndarray
    y: np.ndarray
    var_map: tuple[ExprDag, ...]
    y_map: ExprDag
    origin_X: np.ndarray
    origin_y: np.ndarray
    origin_rows: np.ndarray
    drop_fraction: float = 0.0

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def d_original(self) -> int:
        return self.origin_X.shape[1]

    @classmethod
    def from_arrays(cls, X: np.ndarray, y: np.ndarray) -> "Dataset":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float).reshape(-1)
        if X.ndim != 2 or len(X) != len(y):
            raise ValueError("X must be (n, d) with matching y")
        if X.shape[1] < 1:
            raise ValueError("need at least one input column")
        if not (np.isfinite(X).all() and np.isfinite(y).all()):
            raise ValueError("dataset entries must be finite")
        d = X.shape[1]
        return cls(
            X=X,
            y=y,
            var_map=tuple(variable(i, d) for i in range(d)),
            y_map=variable(d, d + 1),
            origin_X=X,
            origin_y=y,
            origin_rows=np.arange(len(y)),
        )

    def restrict_rows(self, mask: np.ndarray) -> "Dataset":
        return replace(
            self,
            X=self.X[mask],
            y=self.y[mask],
            origin_X=self.origin_X[mask],
            origin_y=self.origin_y[mask],
            origin_rows=self.origin_rows[mask],
        )

    def validate(self, tol: float = 1e-9) -> None:
        """Check that re-evaluating the maps on the original rows reproduces
        the current columns."""
        base = np.column_stack([self.origin_X, self.origin_y])
        for i, vm in enumerate(self.var_map):
            got = evaluate(vm, self.origin_X)
            if not np.allclose(got, self.X[:, i], rtol=tol, atol=tol):
                raise AssertionError(f"var_map[{i}] does not reproduce column {i}")
        got = evaluate(self.y_map, base)
        if not np.allclose(got, self.y, rtol=tol, atol=tol):
            raise AssertionError("y_map does not reproduce the output column")


# -- candidate generation -----------------------------------------------------


_input_dag_cache: dict[tuple, tuple[ExprDag, ...]] = {}
_outinput_dag_cache: dict[tuple, tuple[ExprDag, ...]] = {}


def _budget_key(arity: int, budget: GrammarBudget) -> tuple:
    return (arity, budget.max_intermediary_nodes, tuple(sorted(budget.allowed_ops)),
            budget.allow_constants)


def _depends_on_all(dag: ExprDag, rng: np.random.Generator) -> bool:
    needed = set(range(dag.arity))
    if simplify(dag).var_indices() != needed:
        return False
    try:
        return symbolic.depends_on(dag, needed, rng=rng)
    except Inconclusive:
        return False


def input_candidate_dags(arity: int, budget: GrammarBudget) -> tuple[ExprDag, ...]:
    """Constant-free dags of the given arity that depend on all their inputs,
    deduplicated by canonical form."""
    key = _budget_key(arity, budget)
    if key not in _input_dag_cache:
        budget = replace(budget, allow_constants=False)
        rng = np.random.default_rng(symbolic.DEFAULT_SEED)
        out: list[ExprDag] = []
        seen: set[str] = set()
        for dag in enumerate_dags(arity, budget):
            canon = simplify(dag)
            if canon.key in seen:
                continue
            seen.add(canon.key)
            if _depends_on_all(canon, rng):
                out.append(canon)
        _input_dag_cache[key] = tuple(out)
    return _input_dag_cache[key]


def outinput_candidate_dags(n_inputs: int, budget: GrammarBudget) -> tuple[ExprDag, ...]:
    """Dags over (x_1..x_nI, y) where y occurs once on an invertible path and
    the dag depends on y and on every input."""
    key = _budget_key(n_inputs, budget)
    if key not in _outinput_dag_cache:
        budget = replace(budget, allow_constants=False)
        rng = np.random.default_rng(symbolic.DEFAULT_SEED)
        y_slot = n_inputs
        out: list[ExprDag] = []
        seen: set[str] = set()
        for dag in enumerate_dags(n_inputs + 1, budget):
            canon = simplify(dag)
            if canon.key in seen:
                continue
            seen.add(canon.key)
            if not invertible_path(canon, y_slot):
                continue
            if _depends_on_all(canon, rng):
                out.append(canon)
        _outinput_dag_cache[key] = tuple(out)
    return _outinput_dag_cache[key]


def gen_input_candidates(d: int, budget: GrammarBudget) -> Iterator[InputSub]:
    """All input substitutions for a d-column problem: every |I| = 2 index
    set (and |I| = 3 when the budget admits ternary dags) with every
    candidate dag of that arity."""
    if d < 2:
        return
    sizes = [2]
    if budget.max_intermediary_nodes >= 1:
        sizes.append(3)
    for size in sizes:
        if size > d:
            continue
        dags = input_candidate_dags(size, budget)
        for I in itertools.combinations(range(d), size):
            for g in dags:
                yield InputSub(g=g, I=I)


def gen_outinput_candidates(d: int, budget: GrammarBudget) -> Iterator[OutInputSub]:
    """All out-input substitutions: every |I| = 1 index set (and |I| = 2 when
    the budget admits ternary dags) with every candidate dag over (x_I, y)."""
    if d < 2:
        return
    sizes = [1]
    if budget.max_intermediary_nodes >= 1:
        sizes.append(2)
    for size in sizes:
        if size >= d:
            continue
        dags = outinput_candidate_dags(size, budget)
        for I in itertools.combinations(range(d), size):
            for h in dags:
                yield OutInputSub(h=h, I=I)


def aifeynman_candidates(d: int) -> Iterator[InputSub]:
    """The four classic bivariate substitutions per unordered pair: sum,
    product, difference, and quotient (one canonical orientation each, since
    the sign- and reciprocal-flipped variants carry the same information)."""
    forms = [parse(t, arity=2) for t in ("x1+x2", "x1*x2", "x1-x2", "x1/x2")]
    for i, j in itertools.combinations(range(d), 2):
        for g in forms:
            yield InputSub(g=g, I=(i, j))


# -- applying substitutions -----------------------------------------------------


def _retained(d: int, I: Sequence[int]) -> list[int]:
    drop = set(I)
    return [j for j in range(d) if j not in drop]


def apply_input(ds: Dataset, sub: InputSub) -> Dataset:
    """Transformed dataset with column g(x_I) followed by the retained
    columns; rows where g is non-finite are dropped."""
    if any(i >= ds.d for i in sub.I):
        raise ValueError("substitution indices outside dataset columns")
    col = evaluate(sub.g, ds.X[:, sub.I])
    mask = np.isfinite(col)
    frac = 1.0 - float(mask.mean())
    if frac > MAX_ROW_DROP_FRACTION:
        raise TooFewRows(f"{frac:.1%} of rows dropped")
    keep = _retained(ds.d, sub.I)
    new_x = np.column_stack([col[mask], ds.X[mask][:, keep]])
    d0 = ds.d_original
    new_map = (compose(sub.g, [ds.var_map[i] for i in sub.I], d0),) + tuple(
        ds.var_map[j] for j in keep
    )
    return Dataset(
        X=new_x,
        y=ds.y[mask],
        var_map=new_map,
        y_map=ds.y_map,
        origin_X=ds.origin_X[mask],
        origin_y=ds.origin_y[mask],
        origin_rows=ds.origin_rows[mask],
        drop_fraction=frac,
    )


def apply_outinput(ds: Dataset, sub: OutInputSub) -> Dataset:
    """Transformed dataset with output h(x_I, y) and the I columns dropped."""
    if any(i >= ds.d for i in sub.I):
        raise ValueError("substitution indices outside dataset columns")
    if len(sub.I) >= ds.d:
        raise ValueError("out-input substitution must leave at least one input")
    args = np.column_stack([ds.X[:, sub.I], ds.y])
    new_y = evaluate(sub.h, args)
    mask = np.isfinite(new_y)
    frac = 1.0 - float(mask.mean())
    if frac > MAX_ROW_DROP_FRACTION:
        raise TooFewRows(f"{frac:.1%} of rows dropped")
    keep = _retained(ds.d, sub.I)
    d0 = ds.d_original
    new_y_map = compose(
        sub.h,
        [ds.var_map[i] for i in sub.I] + [ds.y_map],
        d0 + 1,
    )
    return Dataset(
        X=ds.X[mask][:, keep],
        y=new_y[mask],
        var_map=tuple(ds.var_map[j] for j in keep),
        y_map=new_y_map,
        origin_X=ds.origin_X[mask],
        origin_y=ds.origin_y[mask],
        origin_rows=ds.origin_rows[mask],
        drop_fraction=frac,
    )


def apply_substitution(ds: Dataset, sub: Substitution) -> Dataset:
    if isinstance(sub, InputSub):
        return apply_input(ds, sub)
    return apply_outinput(ds, sub)


def near_constant(y: np.ndarray) -> bool:
    """Transformed outputs whose sample spread is numerically negligible."""
    y = np.asarray(y, dtype=float)
    return float(y.std()) <= NEAR_CONSTANT_REL_STD * abs(float(y.mean()))


def degenerate_column(x: np.ndarray) -> bool:
    """A transformed input column whose bulk collapses below float
    resolution (outliers so extreme that the interquartile range vanishes
    relative to the full range); nearest-neighbor geometry on such a column
    reduces to arbitrary tie-breaking."""
    q25, q75 = np.quantile(x, [0.25, 0.75])
    lo, hi = float(np.min(x)), float(np.max(x))
    if hi == lo:
        return True
    return (q75 - q25) <= 1e-12 * (hi - lo)


# -- verification against a known formula --------------------------------------

_gamma_counter = itertools.count()


def _fresh_gamma() -> sp.Symbol:
    return sp.Symbol(f"g_{next(_gamma_counter)}", real=True)


def _numeric_depends_sympy(expr: sp.Expr, symbols: Sequence[sp.Symbol],
                           targets: Sequence[int],
                           rng: np.random.Generator) -> bool | None:
    try:
        fn = symbolic.lambdify_fn(expr, symbols)
    except ValueError:
        return None
    return symbolic.numeric_depends(fn, len(symbols), targets, rng)


def _independent_of(expr: sp.Expr, symbols: Sequence[sp.Symbol],
                    targets: Sequence[int], rng: np.random.Generator
                    ) -> sp.Expr | None:
    """The target-free rewrite of `expr` when it does not depend on the
    target columns, None when it does; Inconclusive when the symbolic and
    numeric views disagree."""
    target_syms = [symbols[t] for t in targets]
    cleaned = symbolic.eliminated_form(expr, target_syms)
    num_dep = _numeric_depends_sympy(expr, symbols, list(targets), rng)
    if num_dep is None:
        if cleaned is not None:
            return cleaned
        raise Inconclusive("no numeric evidence for the dependence check")
    if (cleaned is None) != bool(num_dep):
        raise Inconclusive("symbolic and numeric dependence checks disagree")
    return cleaned


def reduce_truth_input(truth: sp.Expr, symbols: Sequence[sp.Symbol],
                       sub: InputSub, rng: np.random.Generator | None = None
                       ) -> tuple[bool, sp.Expr | None, list[sp.Symbol] | None]:
    """Check an input substitution against a known formula.

    Introduces a fresh symbol for g(x_I), solves for one x_i, substitutes it
    into the formula, and requires the result to be independent of x_I.
    Returns (valid, reduced formula, reduced symbol list); the reduced
    problem's first column corresponds to the fresh symbol.
    """
    rng = rng if rng is not None else np.random.default_rng(symbolic.DEFAULT_SEED)
    size = len(sub.I)
    gamma = _fresh_gamma()
    gamma_slot = variable(size, size + 1)
    solved = None
    for pos in range(size):
        try:
            solved = solve_for(gamma_slot, sub.g, target=pos, check=False)
        except NotSolvable:
            continue
        break
    if solved is None:
        raise Unverifiable("no variable of the candidate is solvable")
    local_exprs = [symbols[i] for i in sub.I] + [gamma]
    xi_expr = symbolic.to_sympy(solved, subs=local_exprs)
    substituted = truth.subs(symbols[sub.I[pos]], xi_expr)
    try:
        cleaned = _independent_of(substituted, list(symbols) + [gamma],
                                  list(sub.I), rng)
    except Inconclusive:
        return False, None, None
    if cleaned is None:
        return False, None, None
    keep = _retained(len(symbols), sub.I)
    return True, cleaned, [gamma] + [symbols[j] for j in keep]


def reduce_truth_outinput(truth: sp.Expr, symbols: Sequence[sp.Symbol],
                          sub: OutInputSub, rng: np.random.Generator | None = None
                          ) -> tuple[bool, sp.Expr | None, list[sp.Symbol] | None]:
    """Check an out-input substitution: h(x_I, f(x)) must be independent of
    x_I; the simplified result is the reduced problem's formula."""
    rng = rng if rng is not None else np.random.default_rng(symbolic.DEFAULT_SEED)
    local_exprs = [symbols[i] for i in sub.I] + [truth]
    transformed = symbolic.to_sympy(sub.h, subs=local_exprs)
    try:
        cleaned = _independent_of(transformed, list(symbols), list(sub.I), rng)
    except Inconclusive:
        return False, None, None
    if cleaned is None:
        return False, None, None
    keep = _retained(len(symbols), sub.I)
    return True, cleaned, [symbols[j] for j in keep]


def _truth_symbols(f_true: ExprDag) -> list[sp.Symbol]:
    return [sp.Symbol(f"x{i + 1}", real=True) for i in range(f_true.arity)]


def verify_input_sub(f_true: ExprDag, sub: InputSub,
                     rng: np.random.Generator | None = None) -> bool:
    """Whether the substitution is valid for the known formula."""
    symbols = _truth_symbols(f_true)
    truth = symbolic.to_sympy(f_true, subs=symbols)
    valid, _, _ = reduce_truth_input(truth, symbols, sub, rng)
    return valid


def verify_outinput_sub(f_true: ExprDag, sub: OutInputSub,
                        rng: np.random.Generator | None = None) -> bool:
    symbols = _truth_symbols(f_true)
    truth = symbolic.to_sympy(f_true, subs=symbols)
    valid, _, _ = reduce_truth_outinput(truth, symbols, sub, rng)
    return valid


def verify_substitution(f_true: ExprDag, sub: Substitution,
                        rng: np.random.Generator | None = None) -> bool:
    if isinstance(sub, InputSub):
        return verify_input_sub(f_true, sub, rng)
    return verify_outinput_sub(f_true, sub, rng)
