"""Iterative dimension reduction organized as a beam search.

Levels hold transformed regression problems; edges are candidate
substitutions.  Children are scored with a functional dependence measure,
each level keeps the highest-scoring beam-size children, and the result is
the path from the root to the best-scoring problem seen anywhere in the
tree (the root itself included, so "no reduction" is a possible answer).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterator, Optional

from .dag import ExprDag, compose, rename_vars, solve_for
from .depmeasure import DependenceScore, chatterjee_xi, codec, compute_ranks, kmac, volume_score
from .errors import DegenerateY, TooFewRows
from .exprtext import to_text
from .grammar import GrammarBudget
from .substitution import (
    CANDIDATE_CAP,
    Dataset,
    InputSub,
    Substitution,
    aifeynman_candidates,
    apply_substitution,
    degenerate_column,
    gen_input_candidates,
    gen_outinput_candidates,
    near_constant,
)

MIN_ROOT_ROWS = 30


@dataclass(frozen=True)
class BeamConfig:
    beam_size: int = 1
    measure: str = "codec"
    budget: GrammarBudget = field(default_factory=GrammarBudget)
    sub_types: frozenset = frozenset({"input", "outinput"})
    max_depth: int | None = None
    grammar: str = "dag"  # "dag" or "aifeynman"

    def __post_init__(self) -> None:
        if self.beam_size < 1:
            raise ValueError("beam_size must be >= 1")
        if self.measure not in ("xi", "codec", "kmac", "volume"):
            raise ValueError(f"unknown measure {self.measure!r}")
        unknown = set(self.sub_types) - {"input", "outinput"}
        if unknown:
            raise ValueError(f"unknown substitution types: {sorted(unknown)}")
        if self.grammar not in ("dag", "aifeynman"):
            raise ValueError(f"unknown grammar {self.grammar!r}")


@dataclass
class SearchNode:
    dataset: Dataset
    score: DependenceScore
    parent: Optional["SearchNode"] = None
    edge: Optional[Substitution] = None
    depth: int = 0
    seq: int = 0  # discovery order, used for deterministic tie-breaking

    @property
    def n_vars(self) -> int:
        return self.dataset.d


@dataclass
class SearchResult:
    best_path: list[SearchNode]
    all_levels: list[list[SearchNode]]

    @property
    def best(self) -> SearchNode:
        return self.best_path[-1]

    @property
    def root(self) -> SearchNode:
        return self.best_path[0]


def _score_dataset(ds: Dataset, measure: str, y_ranks=None) -> DependenceScore:
    if measure == "codec":
        return codec(ds.X, ds.y, ranks=y_ranks)
    if measure == "kmac":
        return kmac(ds.X, ds.y)
    if measure == "volume":
        return volume_score(ds.X, ds.y)
    # the univariate rank coefficient applies to one-column problems; its
    # multivariate generalization covers the rest
    if ds.d == 1:
        return DependenceScore(chatterjee_xi(ds.X[:, 0], ds.y).value, "xi")
    return replace(codec(ds.X, ds.y, ranks=y_ranks), measure="xi")


def score_candidate(parent: SearchNode, sub: Substitution, measure: str,
                    parent_ranks=None) -> tuple[Dataset, DependenceScore] | None:
    """Apply a substitution and score the transformed problem.

    Returns None when the candidate is rejected: too many rows dropped, a
    near-constant output, a resolution-collapsed input column, or a
    degenerate rank denominator.
    """
    try:
        ds = apply_substitution(parent.dataset, sub)
    except TooFewRows:
        return None
    if near_constant(ds.y):
        return None
    if isinstance(sub, InputSub) and degenerate_column(ds.X[:, 0]):
        return None
    try:
        if isinstance(sub, InputSub) and ds.n == parent.dataset.n:
            # output untouched and no rows dropped: reuse the parent's ranks
            score = _score_dataset(ds, measure, y_ranks=parent_ranks)
        else:
            score = _score_dataset(ds, measure)
    except DegenerateY:
        return None
    return ds, score


def _candidates(d: int, cfg: BeamConfig) -> Iterator[Substitution]:
    if cfg.grammar == "aifeynman":
        yield from aifeynman_candidates(d)
        return
    if "input" in cfg.sub_types:
        yield from gen_input_candidates(d, cfg.budget)
    if "outinput" in cfg.sub_types:
        yield from gen_outinput_candidates(d, cfg.budget)


def search(root_ds: Dataset, cfg: BeamConfig) -> SearchResult:
    """Run the beam search; deterministic for identical inputs."""
    if root_ds.n < MIN_ROOT_ROWS:
        raise ValueError(f"need at least {MIN_ROOT_ROWS} rows, got {root_ds.n}")
    try:
        root_score = _score_dataset(root_ds, cfg.measure)
    except DegenerateY:
        root_score = DependenceScore(float("-inf"), cfg.measure)
    root = SearchNode(dataset=root_ds, score=root_score)
    max_depth = cfg.max_depth if cfg.max_depth is not None else max(root_ds.d - 1, 0)

    levels: list[list[SearchNode]] = []
    beam = [root]
    best = root
    seq = itertools.count(1)
    depth = 0
    while beam and depth < max_depth:
        children: list[SearchNode] = []
        for parent in beam:
            if parent.dataset.d <= 1:
                continue
            try:
                parent_ranks = compute_ranks(parent.dataset.y)
            except ValueError:
                continue
            n_cand = 0
            for sub in _candidates(parent.dataset.d, cfg):
                if n_cand >= CANDIDATE_CAP:
                    break
                n_cand += 1
                scored = score_candidate(parent, sub, cfg.measure, parent_ranks)
                if scored is None:
                    continue
                ds, score = scored
                children.append(
                    SearchNode(dataset=ds, score=score, parent=parent,
                               edge=sub, depth=depth + 1, seq=next(seq))
                )
        if not children:
            break
        children.sort(key=lambda node: (-node.score.value, node.n_vars, node.seq))
        survivors = children[: cfg.beam_size]
        levels.append(survivors)
        for node in survivors:
            if node.score.value > best.score.value:
                best = node
        beam = survivors
        depth += 1

    path: list[SearchNode] = []
    node: SearchNode | None = best
    while node is not None:
        path.append(node)
        node = node.parent
    path.reverse()
    return SearchResult(best_path=path, all_levels=levels)


def trace_records(result: SearchResult) -> list[dict]:
    """Line-oriented trace of the surviving nodes, root included."""
    records = [
        {
            "depth": 0,
            "substitution": None,
            "score": result.root.score.value,
            "n_vars": result.root.n_vars,
            "rows_dropped": 0.0,
        }
    ]
    for level in result.all_levels:
        for node in level:
            records.append(
                {
                    "depth": node.depth,
                    "substitution": substitution_text(node.edge),
                    "score": node.score.value,
                    "n_vars": node.n_vars,
                    "rows_dropped": node.dataset.drop_fraction,
                }
            )
    return records


def substitution_text(sub: Substitution | None) -> str | None:
    if sub is None:
        return None
    if isinstance(sub, InputSub):
        cols = ",".join(str(i + 1) for i in sub.I)
        return f"input g({cols}) = {to_text(sub.g)}"
    names = {i: f"x{c + 1}" for i, c in enumerate(sub.I)}
    names[len(sub.I)] = "y"
    cols = ",".join(str(i + 1) for i in sub.I)
    return f"outinput h({cols};y) = {to_text(sub.h, var_names=names)}"


def reconstruct(path: list[SearchNode], solution: "ExprDag") -> "ExprDag":
    """Translate a solution of the final path node back into the original
    coordinates and solve for the original output.

    `solution` is an expression over the final node's columns; the node's
    column maps carry the composed effect of every substitution along the
    path.  Raises NotSolvable when the output cannot be isolated.
    """
    node = path[-1]
    ds = node.dataset
    d0 = ds.d_original
    if solution.arity > ds.d:
        raise ValueError("solution uses more columns than the dataset has")
    rhs = compose(solution, list(ds.var_map), d0 + 1)
    solved = solve_for(ds.y_map, rhs, target=d0)
    used = solved.var_indices()
    if used and max(used) >= d0:
        raise ValueError("reconstruction left the original output symbol unresolved")
    return rename_vars(solved, {}, d0)
