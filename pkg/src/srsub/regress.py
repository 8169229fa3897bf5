"""Symbolic regressors for reduced problems.

Three backends: least-squares polynomial regression up to a degree bound, a
skeleton-enumeration regressor that reuses the dag grammar with fitted
constant placeholders, and a subprocess bridge that feeds CSV to an external
command and parses one expression line from its stdout.
"""

from __future__ import annotations

import itertools
import os
import subprocess
import tempfile
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .beamsearch import SearchNode, SearchResult, reconstruct
from .dag import DagBuilder, ExprDag, bind_placeholders, evaluate
from .errors import DegenerateY, ExternalFailure, IllConditionedWarning, NotSolvable
from .exprtext import parse
from .grammar import GrammarBudget, enumerate_dags
from .simplify import complexity
from .substitution import Dataset

NONFINITE_PENALTY = 10.0


@dataclass(frozen=True)
class RegressorSpec:
    kind: str = "poly"  # poly | dagsearch | external
    max_degree: int = 2
    max_intermediary_nodes: int = 2
    max_skeletons: int = 10_000
    command: str | None = None
    timeout: float = 60.0

    def __post_init__(self) -> None:
        if self.kind not in ("poly", "dagsearch", "external"):
            raise ValueError(f"unknown regressor kind {self.kind!r}")
        if self.kind == "poly" and self.max_degree < 1:
            raise ValueError("poly max_degree must be >= 1")
        if self.kind == "dagsearch" and (self.max_intermediary_nodes < 1 or self.max_skeletons < 1):
            raise ValueError("dagsearch budgets must be >= 1")
        if self.kind == "external" and not self.command:
            raise ValueError("external regressor needs a command template")


@dataclass
class SolveResult:
    expr: ExprDag
    nrmse_test: float
    complexity: int
    recovered: bool | None = None
    source_node_depth: int = 0


def nrmse(y: np.ndarray, yhat: np.ndarray, penalty: float = NONFINITE_PENALTY) -> float:
    """Root-mean-square error normalized by the root-mean-square of y.

    Rows with non-finite predictions (or non-finite squared error) contribute
    penalty^2 * mean(y^2) each, so diverging models stay on a finite scale.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    yhat = np.asarray(yhat, dtype=float).reshape(-1)
    total = float(np.sum(y * y))
    if total == 0.0:
        raise DegenerateY("zero output norm")
    n = len(y)
    with np.errstate(all="ignore"):
        sq = (y - yhat) ** 2
    bad = ~np.isfinite(sq)
    sq = np.where(bad, penalty * penalty * total / n, sq)
    return float(np.sqrt(np.sum(sq) / total))


# -- polynomial regression -----------------------------------------------------


def _monomial_exponents(d: int, max_degree: int) -> list[tuple[int, ...]]:
    exps = []
    for total in range(max_degree + 1):
        for combo in itertools.combinations_with_replacement(range(d), total):
            e = [0] * d
            for j in combo:
                e[j] += 1
            exps.append(tuple(e))
    return exps


def _design_matrix(X: np.ndarray, exps: Sequence[tuple[int, ...]]) -> np.ndarray:
    cols = []
    for e in exps:
        col = np.ones(len(X))
        for j, p in enumerate(e):
            if p:
                col = col * X[:, j] ** p
        cols.append(col)
    return np.column_stack(cols)


def fit_poly(ds: Dataset, max_degree: int = 2) -> ExprDag:
    """Least squares over all monomials of total degree <= max_degree.

    Coefficients below 1e-8 of the largest are pruned.  A numerically
    singular system falls back to a ridge solve (1e-10) and warns.
    """
    X, y = ds.X, ds.y
    exps = _monomial_exponents(ds.d, max_degree)
    if ds.n <= len(exps):
        raise ValueError(f"need more than {len(exps)} rows for degree {max_degree}")
    A = _design_matrix(X, exps)
    coef, _, rank, _ = np.linalg.lstsq(A, y, rcond=None)
    if rank < A.shape[1]:
        warnings.warn("singular normal system; ridge fallback", IllConditionedWarning)
        AtA = A.T @ A + 1e-10 * np.eye(A.shape[1])
        coef = np.linalg.solve(AtA, A.T @ y)
    keep = np.abs(coef) >= 1e-8 * np.max(np.abs(coef)) if np.any(coef) else np.zeros(len(coef), bool)
    b = DagBuilder()
    terms = []
    for c, e, used in zip(coef, exps, keep):
        if not used:
            continue
        factors = [b.const(float(c))]
        for j, p in enumerate(e):
            for _ in range(p):
                factors.append(b.var(j))
        node = factors[0]
        for f in factors[1:]:
            node = b.binary("*", node, f)
        terms.append(node)
    if not terms:
        return b.extract(b.const(0.0), ds.d)
    node = terms[0]
    for t in terms[1:]:
        node = b.binary("+", node, t)
    return b.extract(node, ds.d)


# -- dag skeleton search ---------------------------------------------------------


_skeleton_cache: dict[tuple, tuple[ExprDag, ...]] = {}


def _skeletons(arity: int, budget: GrammarBudget, cap: int) -> tuple[ExprDag, ...]:
    key = (arity, budget.max_intermediary_nodes, tuple(sorted(budget.allowed_ops)), cap)
    if key not in _skeleton_cache:
        gen = enumerate_dags(arity, budget)
        _skeleton_cache[key] = tuple(itertools.islice(gen, cap))
    return _skeleton_cache[key]


def _fit_constants(dag: ExprDag, names: list[str], X: np.ndarray, y: np.ndarray,
                   refine: bool) -> tuple[dict[str, float], float]:
    """Fit placeholders: one finite-difference Gauss-Newton step from 1.0,
    then an optional bounded simplex refinement."""

    def objective(theta: np.ndarray) -> float:
        params = dict(zip(names, theta))
        try:
            pred = evaluate(dag, X, params)
            return nrmse(y, pred)
        except DegenerateY:
            return NONFINITE_PENALTY

    theta = np.ones(len(names))
    best = objective(theta)
    # linearization step
    try:
        pred0 = evaluate(dag, X, dict(zip(names, theta)))
        if np.isfinite(pred0).all():
            eps = 1e-6
            J = np.empty((len(y), len(names)))
            ok = True
            for j in range(len(names)):
                tj = theta.copy()
                tj[j] += eps
                pj = evaluate(dag, X, dict(zip(names, tj)))
                if not np.isfinite(pj).all():
                    ok = False
                    break
                J[:, j] = (pj - pred0) / eps
            if ok:
                step, *_ = np.linalg.lstsq(J, y - pred0, rcond=None)
                cand = theta + step
                val = objective(cand)
                if np.isfinite(val) and val < best:
                    theta, best = cand, val
    except (ValueError, FloatingPointError):
        pass
    if refine:
        res = minimize(objective, theta, method="Nelder-Mead",
                       options={"maxiter": 200, "xatol": 1e-10, "fatol": 1e-12})
        if np.isfinite(res.fun) and res.fun < best:
            theta, best = res.x, float(res.fun)
    return dict(zip(names, theta)), best


def fit_dagsearch(ds: Dataset, budget: GrammarBudget | None = None,
                  max_skeletons: int = 10_000, refine_top: int = 200) -> ExprDag:
    """Enumerate dag skeletons with constant placeholders, fit the constants,
    and return the minimum-NRMSE expression (ties to lower complexity).

    The worst case is the constant model y = mean.
    """
    if ds.n < 20:
        raise ValueError("need at least 20 rows")
    if budget is None:
        budget = GrammarBudget(max_intermediary_nodes=2, allow_constants=True)
    elif not budget.allow_constants:
        budget = GrammarBudget(budget.max_intermediary_nodes, budget.allowed_ops, True)
    X, y = ds.X, ds.y

    b = DagBuilder()
    const_model = b.extract(b.const(float(np.mean(y))), ds.d)
    try:
        best_err = nrmse(y, np.full(ds.n, float(np.mean(y))))
    except DegenerateY:
        best_err = NONFINITE_PENALTY
    best_expr = const_model

    candidates: list[tuple[float, int, ExprDag, list[str]]] = []
    for pos, skel in enumerate(_skeletons(ds.d, budget, max_skeletons)):
        names = skel.placeholders()
        if not names:
            try:
                err = nrmse(y, evaluate(skel, X))
            except DegenerateY:
                continue
            candidates.append((err, pos, skel, names))
        else:
            params, err = _fit_constants(skel, names, X, y, refine=False)
            candidates.append((err, pos, bind_placeholders(skel, params), names))

    candidates.sort(key=lambda item: (item[0], item[1]))
    for err, pos, expr, names in candidates[:refine_top]:
        if names:
            skel = _skeletons(ds.d, budget, max_skeletons)[pos]
            params, err = _fit_constants(skel, names, X, y, refine=True)
            expr = bind_placeholders(skel, params)
        if err < best_err - 1e-15 or (
            abs(err - best_err) <= 1e-15 and complexity(expr) < complexity(best_expr)
        ):
            best_err, best_expr = err, expr
    return best_expr


# -- external bridge -------------------------------------------------------------


def write_csv(path: str, X: np.ndarray, y: np.ndarray) -> None:
    d = X.shape[1]
    header = ",".join([f"x{i + 1}" for i in range(d)] + ["y"])
    data = np.column_stack([X, y])
    np.savetxt(path, data, delimiter=",", header=header, comments="")


def fit_external(ds: Dataset, spec: RegressorSpec) -> ExprDag:
    """Write the dataset as CSV, run the command template, and parse the
    first non-empty stdout line as an expression."""
    if spec.command is None:
        raise ValueError("external regressor needs a command")
    fd, path = tempfile.mkstemp(suffix=".csv", prefix="srsub_")
    os.close(fd)
    try:
        write_csv(path, ds.X, ds.y)
        cmd = spec.command.format(csv=path) if "{csv}" in spec.command else f"{spec.command} {path}"
        try:
            proc = subprocess.run(
                cmd, shell=True, capture_output=True, text=True, timeout=spec.timeout
            )
        except subprocess.TimeoutExpired as exc:
            raise ExternalFailure(f"external regressor timed out after {spec.timeout}s") from exc
        if proc.returncode != 0:
            raise ExternalFailure(f"external regressor exited {proc.returncode}: {proc.stderr.strip()[:200]}")
        for line in proc.stdout.splitlines():
            line = line.strip()
            if line:
                try:
                    return parse(line, arity=ds.d)
                except Exception as exc:
                    raise ExternalFailure(f"cannot parse output line {line!r}") from exc
        raise ExternalFailure("external regressor produced no output")
    finally:
        os.unlink(path)


def fit(ds: Dataset, spec: RegressorSpec) -> ExprDag:
    if spec.kind == "poly":
        return fit_poly(ds, spec.max_degree)
    if spec.kind == "dagsearch":
        budget = GrammarBudget(max_intermediary_nodes=spec.max_intermediary_nodes,
                               allow_constants=True)
        return fit_dagsearch(ds, budget, spec.max_skeletons)
    return fit_external(ds, spec)


# -- end-to-end pipeline ----------------------------------------------------------


def holdout_mask(n: int, fraction: float, seed: int) -> np.ndarray:
    """Deterministic boolean test mask with ceil(fraction * n) rows."""
    if not 0 < fraction < 1:
        raise ValueError("holdout fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    k = max(1, int(round(fraction * n)))
    mask = np.zeros(n, dtype=bool)
    mask[rng.choice(n, size=k, replace=False)] = True
    return mask


def solve_pipeline(result: SearchResult, spec: RegressorSpec,
                   holdout_fraction: float = 0.2, seed: int = 0,
                   holdout: tuple[np.ndarray, np.ndarray] | None = None) -> SolveResult:
    """Fit the regressor at every node on the best path, reconstruct each
    solution to the original coordinates, and keep the minimum test NRMSE.

    `holdout` supplies original-coordinate test data (X0, y0); without it a
    seed-deterministic fraction of the root rows is held out and the node
    fits use the remaining rows.
    """
    root_ds = result.root.dataset
    if holdout is None:
        mask = holdout_mask(root_ds.n, holdout_fraction, seed)
        X_test = root_ds.origin_X[mask]
        y_test = root_ds.origin_y[mask]
        test_rows = set(root_ds.origin_rows[mask].tolist())
    else:
        X_test, y_test = holdout
        test_rows = None

    best: SolveResult | None = None
    for node in result.best_path:
        ds = node.dataset
        if test_rows is not None:
            train = np.array([r not in test_rows for r in ds.origin_rows])
            if train.sum() < 3:
                continue
            ds = ds.restrict_rows(train)
        try:
            sol = fit(ds, spec)
            expr = reconstruct(_path_to(node, result), sol)
            pred = evaluate(expr, X_test)
            err = nrmse(y_test, pred)
        except (NotSolvable, DegenerateY, ExternalFailure, ValueError):
            continue
        if best is None or err < best.nrmse_test:
            best = SolveResult(expr=expr, nrmse_test=err,
                               complexity=complexity(expr),
                               source_node_depth=node.depth)
    if best is None:
        raise ExternalFailure("no node of the path produced a usable model")
    return best


def _path_to(node: SearchNode, result: SearchResult) -> list[SearchNode]:
    path = []
    cur: SearchNode | None = node
    while cur is not None:
        path.append(cur)
        cur = cur.parent
    path.reverse()
    return path
