"""Benchmark harness: corpus ingestion, sampling, noise, metrics, reports.

A corpus file holds one problem per line (``id<TAB>d<TAB>expression``,
``#`` comments).  For every problem the harness samples the formula, adds
noise, runs a root-only arm and a beam-search arm with a shared holdout, and
per problem reports reduction metrics together with per-arm recovery, fit
and complexity numbers.
"""

from __future__ import annotations

import csv
import importlib.resources
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import sympy as sp

from . import symbolic
from .beamsearch import BeamConfig, SearchNode, SearchResult, search, trace_records
from .dag import ExprDag, evaluate
from .errors import DegenerateY, Unsampleable, Unverifiable
from .exprtext import parse
from .regress import RegressorSpec, holdout_mask, solve_pipeline
from .simplify import subexpressions
from .substitution import (
    Dataset,
    InputSub,
    reduce_truth_input,
    reduce_truth_outinput,
)
from .symbolic import equivalent

SAMPLER_START = 1.0
SAMPLER_STEP = 0.5
SAMPLER_LIMIT = 150.0

BUNDLED_CORPORA = {
    "feynman-desk": "feynman_desk.tsv",
    "eponymous-desk": "eponymous_desk.tsv",
}


@dataclass
class Problem:
    id: str
    d: int
    f_true: ExprDag
    samples: Dataset | None = None
    # optional fixed sampling box, one (lo, hi) per variable; None selects
    # the interval-growing sampler
    box: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self) -> None:
        if self.f_true.arity != self.d:
            raise ValueError(f"{self.id}: formula arity {self.f_true.arity} != d {self.d}")
        if self.box is not None:
            if len(self.box) != self.d:
                raise ValueError(f"{self.id}: box needs one range per variable")
            if any(not lo < hi for lo, hi in self.box):
                raise ValueError(f"{self.id}: empty sampling box")


@dataclass(frozen=True)
class NoiseLevel:
    gamma: float = 0.0

    def __post_init__(self) -> None:
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")


@dataclass
class Report:
    rows: list[dict]
    aggregates: dict
    traces: list[dict]

    def to_csv(self, path: str | Path) -> None:
        ok_rows = [r for r in self.rows if r.get("status") == "ok"]
        fields = list(self.rows[0].keys()) if self.rows else []
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fields)
            writer.writeheader()
            for row in self.rows:
                writer.writerow(row)
            if ok_rows:
                agg = {k: self.aggregates.get(k, "") for k in fields}
                agg["id"] = "AGGREGATE_MEAN"
                writer.writerow(agg)


def load_corpus(source: str | Path) -> list[Problem]:
    """Read problems from a corpus file or a bundled corpus name."""
    name = str(source)
    if name in BUNDLED_CORPORA:
        ref = importlib.resources.files("srsub").joinpath("data", BUNDLED_CORPORA[name])
        text = ref.read_text(encoding="utf-8")
    else:
        text = Path(source).read_text(encoding="utf-8")
    problems = []
    for lineno, line in enumerate(io.StringIO(text), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) not in (3, 4):
            raise ValueError(f"line {lineno}: expected id<TAB>d<TAB>expression[<TAB>lo:hi]")
        pid, d_text, expr_text = parts[:3]
        d = int(d_text)
        box = None
        if len(parts) == 4:
            ranges = parts[3].split(",")
            if len(ranges) == 1:
                ranges = ranges * d
            box = tuple((float(lo), float(hi)) for lo, hi in
                        (r.split(":") for r in ranges))
        problems.append(Problem(id=pid, d=d, f_true=parse(expr_text, arity=d), box=box))
    return problems


def sample_problem(p: Problem, n: int, seed: int) -> Dataset:
    """Sample observations of a known formula.

    Without a sampling box: interval-growing rejection sampling.  Draw the
    missing rows uniformly on [-c, c]^d, keep rows where the formula
    evaluates to a finite value, and grow c by 0.5 until n rows are
    collected; reject the problem when c exceeds 150 with rows still
    missing.  With a box: draw uniformly on the fixed box with the same
    finite-row rejection.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    d = max(p.d, 1)
    rows_x: list[np.ndarray] = []
    rows_y: list[np.ndarray] = []
    have = 0
    c = SAMPLER_START
    rounds = 0
    while have < n:
        if p.box is None:
            if c > SAMPLER_LIMIT:
                raise Unsampleable(f"{p.id}: interval limit reached with {have}/{n} rows")
            pts = rng.uniform(-c, c, size=(n - have, d))
        else:
            if rounds > 200:
                raise Unsampleable(f"{p.id}: sampling box yields too few valid rows")
            lows = np.array([lo for lo, _ in p.box])
            highs = np.array([hi for _, hi in p.box])
            pts = rng.uniform(lows, highs, size=(n - have, d))
        vals = evaluate(p.f_true, pts)
        mask = np.isfinite(vals)
        if mask.any():
            rows_x.append(pts[mask])
            rows_y.append(vals[mask])
            have += int(mask.sum())
        c += SAMPLER_STEP
        rounds += 1
    X = np.vstack(rows_x)[:n]
    y = np.concatenate(rows_y)[:n]
    return Dataset.from_arrays(X, y)


def add_noise(y: np.ndarray, gamma: float, seed: int) -> np.ndarray:
    """Additive Gaussian noise with standard deviation gamma * RMS(y)."""
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    y = np.asarray(y, dtype=float)
    if gamma == 0.0:
        return y.copy()
    rng = np.random.default_rng(seed)
    scale = gamma * float(np.sqrt(np.mean(y * y)))
    return y + rng.normal(0.0, scale, size=len(y))


# -- verification of search results ---------------------------------------------


def _chain_verify(result: SearchResult, p: Problem) -> dict[int, bool]:
    """Validity of every surviving node's full edge chain.

    Returns {id(node): verified}; Unverifiable edges count as not verified
    and are tallied by the caller via `chain_stats`.
    """
    symbols = [sp.Symbol(f"x{i + 1}", real=True) for i in range(p.d)]
    truth = symbolic.to_sympy(p.f_true, subs=symbols)
    states: dict[int, tuple[bool, sp.Expr | None, list | None]] = {}
    root = result.root
    states[id(root)] = (True, truth, symbols)
    verdict: dict[int, bool] = {id(root): True}

    def node_state(node: SearchNode):
        key = id(node)
        if key in states:
            return states[key]
        parent_ok, parent_truth, parent_syms = node_state(node.parent)
        if not parent_ok:
            states[key] = (False, None, None)
        else:
            try:
                if isinstance(node.edge, InputSub):
                    ok, new_truth, new_syms = reduce_truth_input(
                        parent_truth, parent_syms, node.edge
                    )
                else:
                    ok, new_truth, new_syms = reduce_truth_outinput(
                        parent_truth, parent_syms, node.edge
                    )
            except Unverifiable:
                ok, new_truth, new_syms = False, None, None
            states[key] = (ok, new_truth, new_syms)
        return states[key]

    for level in result.all_levels:
        for node in level:
            verdict[id(node)] = node_state(node)[0]
    return verdict


def reduction_rate(result: SearchResult, p: Problem) -> tuple[float, bool]:
    """1 - (fewest variables over verified nodes) / (original variables).

    Only nodes whose entire edge chain verifies enter the minimum;
    `all_valid` reports whether the best-scoring path verified end to end.
    """
    verdict = _chain_verify(result, p)
    d0 = result.root.dataset.d
    best_vars = d0
    for level in result.all_levels:
        for node in level:
            if verdict[id(node)]:
                best_vars = min(best_vars, node.n_vars)
    rate = 1.0 - best_vars / d0
    all_valid = verdict.get(id(result.best), False)
    return rate, all_valid


def chain_stats(result: SearchResult, p: Problem) -> dict:
    """Reduction rates plus verification bookkeeping for report rows."""
    verdict = _chain_verify(result, p)
    d0 = result.root.dataset.d
    best_vars = d0
    best_vars_unfiltered = d0
    n_nodes = 0
    n_valid = 0
    for level in result.all_levels:
        for node in level:
            n_nodes += 1
            best_vars_unfiltered = min(best_vars_unfiltered, node.n_vars)
            if verdict[id(node)]:
                n_valid += 1
                best_vars = min(best_vars, node.n_vars)
    return {
        "reduction_rate": 1.0 - best_vars / d0,
        "reduction_rate_unfiltered": 1.0 - best_vars_unfiltered / d0,
        "valid_sub_fraction": (n_valid / n_nodes) if n_nodes else 1.0,
        "best_path_valid": verdict.get(id(result.best), False),
    }


# -- expression-level metrics ------------------------------------------------------


def recovery(f_true: ExprDag, f_hat: ExprDag) -> bool:
    """Symbolic equivalence up to an additive or multiplicative constant."""
    return equivalent(f_true, f_hat)


def jaccard(f_true: ExprDag, f_hat: ExprDag) -> float:
    """Overlap of the simplified subexpression sets."""
    s_true = {e.key for e in subexpressions(f_true)}
    s_hat = {e.key for e in subexpressions(f_hat)}
    union = s_true | s_hat
    if not union:
        return 1.0
    return len(s_true & s_hat) / len(union)


# -- benchmark loop ------------------------------------------------------------------


_AGGREGATE_FIELDS = (
    "reduction_rate",
    "reduction_rate_unfiltered",
    "valid_sub_fraction",
    "best_path_valid",
    "base_recovered",
    "base_nrmse",
    "base_complexity",
    "base_jaccard",
    "beam_recovered",
    "beam_nrmse",
    "beam_complexity",
    "beam_jaccard",
    "wall_time",
)


def _root_only_result(ds: Dataset, cfg: BeamConfig) -> SearchResult:
    from .beamsearch import _score_dataset

    try:
        score = _score_dataset(ds, cfg.measure)
    except DegenerateY:
        from .depmeasure import DependenceScore

        score = DependenceScore(float("-inf"), cfg.measure)
    node = SearchNode(dataset=ds, score=score)
    return SearchResult(best_path=[node], all_levels=[])


def _arm_metrics(result: SearchResult, spec: RegressorSpec, p: Problem,
                 holdout: tuple[np.ndarray, np.ndarray]) -> dict:
    sol = solve_pipeline(result, spec, holdout=holdout)
    rec = recovery(p.f_true, sol.expr)
    return {
        "recovered": bool(rec),
        "nrmse": sol.nrmse_test,
        "complexity": sol.complexity,
        "jaccard": jaccard(p.f_true, sol.expr),
        "depth": sol.source_node_depth,
        "expr": sol.expr,
    }


def run_problem(p: Problem, cfg: BeamConfig, spec: RegressorSpec,
                noise: NoiseLevel, seed: int, n_samples: int = 1000,
                holdout_fraction: float = 0.2, fit_models: bool = True) -> tuple[dict, list[dict]]:
    """Both arms for one problem; returns (report row, trace records)."""
    t0 = time.monotonic()
    row: dict = {"id": p.id, "d": p.d, "status": "ok", "error": ""}
    try:
        ds = p.samples if p.samples is not None else sample_problem(p, n_samples, seed)
        y_noisy = add_noise(ds.y, noise.gamma, seed + 1)
        full = Dataset.from_arrays(ds.X, y_noisy)
        mask = holdout_mask(full.n, holdout_fraction, seed + 2)
        train = full.restrict_rows(~mask)
        holdout = (full.origin_X[mask], full.origin_y[mask])

        result = search(train, cfg)
        row.update(chain_stats(result, p))
        traces = [dict(rec, id=p.id) for rec in trace_records(result)]

        if fit_models:
            base = _arm_metrics(_root_only_result(train, cfg), spec, p, holdout)
            beam = _arm_metrics(result, spec, p, holdout)
            for tag, metrics in (("base", base), ("beam", beam)):
                row[f"{tag}_recovered"] = metrics["recovered"]
                row[f"{tag}_nrmse"] = metrics["nrmse"]
                row[f"{tag}_complexity"] = metrics["complexity"]
                row[f"{tag}_jaccard"] = metrics["jaccard"]
            row["beam_depth"] = beam["depth"]
    except Exception as exc:  # per-problem failures become rows, never aborts
        row["status"] = type(exc).__name__
        row["error"] = str(exc)[:200]
        traces = []
    row["wall_time"] = time.monotonic() - t0
    return row, traces


def _run_problem_star(args) -> tuple[dict, list[dict]]:
    return run_problem(*args)


def run_benchmark(problems: Sequence[Problem], cfg: BeamConfig, spec: RegressorSpec,
                  noise: NoiseLevel, seed: int, n_samples: int = 1000,
                  holdout_fraction: float = 0.2, fit_models: bool = True,
                  workers: int = 1) -> Report:
    """Evaluate every problem with a per-problem derived seed.

    Failures are recorded as rows with a status, never aborting the run;
    aggregates are the means of the ok rows.  Deterministic per seed,
    independent of the worker count.
    """
    seeds = [seed + 1000 * i for i in range(len(problems))]
    tasks = [
        (p, cfg, spec, noise, s, n_samples, holdout_fraction, fit_models)
        for p, s in zip(problems, seeds)
    ]
    if workers > 1 and len(problems) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_problem_star, tasks))
    else:
        outcomes = [_run_problem_star(t) for t in tasks]
    rows = [row for row, _ in outcomes]
    traces = [rec for _, recs in outcomes for rec in recs]
    ok = [r for r in rows if r["status"] == "ok"]
    aggregates: dict = {"n_problems": len(rows), "n_ok": len(ok)}
    for key in _AGGREGATE_FIELDS:
        vals = [float(r[key]) for r in ok if key in r]
        if vals:
            aggregates[key] = float(np.mean(vals))
    return Report(rows=rows, aggregates=aggregates, traces=traces)
