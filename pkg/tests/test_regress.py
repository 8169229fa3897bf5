"""Regressors: polynomial, dag-skeleton search, external bridge, pipeline."""

import sys
import textwrap

import numpy as np
import pytest

from srsub import (
    BeamConfig,
    Dataset,
    GrammarBudget,
    RegressorSpec,
    equivalent,
    evaluate,
    fit_dagsearch,
    fit_external,
    fit_poly,
    nrmse,
    parse,
    search,
    solve_pipeline,
)
from srsub.beamsearch import SearchNode, _score_dataset, SearchResult
from srsub.errors import DegenerateY, ExternalFailure
from srsub.regress import holdout_mask

from oracles import nrmse_direct


def _dataset(f_text, n=300, seed=0, low=0.5, high=2.5):
    rng = np.random.default_rng(seed)
    f = parse(f_text)
    X = rng.uniform(low, high, size=(n, f.arity))
    return Dataset.from_arrays(X, evaluate(f, X))


# -- nrmse -----------------------------------------------------------------------


def test_nrmse_perfect_predictions():
    y = np.array([1.0, 2.0, 3.0])
    assert nrmse(y, y) == 0.0


def test_nrmse_zero_predictor_is_one():
    y = np.array([3.0, -1.0, 2.0])
    assert nrmse(y, np.zeros(3)) == pytest.approx(1.0)


def test_nrmse_matches_direct_oracle():
    rng = np.random.default_rng(1)
    y = rng.normal(size=200)
    yhat = y + 0.1 * rng.normal(size=200)
    assert nrmse(y, yhat) == pytest.approx(nrmse_direct(y, yhat), rel=1e-12)


def test_nrmse_nonfinite_penalty_cap():
    y = np.ones(4)
    yhat = np.full(4, np.nan)
    assert nrmse(y, yhat) == pytest.approx(10.0)


def test_nrmse_degenerate():
    with pytest.raises(DegenerateY):
        nrmse(np.zeros(3), np.ones(3))


# -- polynomial regressor -----------------------------------------------------------


def test_poly_recovers_quadratic():
    ds = _dataset("3*x1*x2+2", n=200, seed=2)
    expr = fit_poly(ds, max_degree=2)
    assert equivalent(expr, parse("3*x1*x2+2", arity=2))
    pred = evaluate(expr, ds.X)
    assert nrmse(ds.y, pred) < 1e-8


def test_poly_coefficients_match_pseudoinverse():
    rng = np.random.default_rng(3)
    X = rng.uniform(-1, 1, size=(120, 2))
    y = 1.5 + 0.5 * X[:, 0] - 2.0 * X[:, 1] + 0.25 * X[:, 0] * X[:, 1]
    ds = Dataset.from_arrays(X, y)
    expr = fit_poly(ds, max_degree=2)
    from srsub.regress import _design_matrix, _monomial_exponents

    exps = _monomial_exponents(2, 2)
    A = _design_matrix(X, exps)
    coef_oracle = np.linalg.pinv(A) @ y
    pred = evaluate(expr, X)
    pred_oracle = A @ coef_oracle
    assert np.allclose(pred, pred_oracle, atol=1e-8)


def test_poly_narrow_sine_is_not_recovered():
    rng = np.random.default_rng(4)
    X = rng.uniform(-0.01, 0.01, size=(100, 1))
    ds = Dataset.from_arrays(X, np.sin(X[:, 0]))
    expr = fit_poly(ds, max_degree=2)
    assert not equivalent(expr, parse("sin(x1)"))


def test_poly_needs_enough_rows():
    ds = _dataset("x1+x2", n=300)
    small = ds.restrict_rows(np.arange(ds.n) < 5)
    with pytest.raises(ValueError):
        fit_poly(small, max_degree=2)


# -- dag skeleton search ---------------------------------------------------------------


def test_dagsearch_recovers_product():
    ds = _dataset("x1*x2", n=200, seed=5)
    expr = fit_dagsearch(ds, GrammarBudget(max_intermediary_nodes=1, allow_constants=True),
                         max_skeletons=2000)
    assert nrmse(ds.y, evaluate(expr, ds.X)) < 1e-9
    assert equivalent(expr, parse("x1*x2"))


def test_dagsearch_recovers_scaled_cosine():
    ds = _dataset("cos(x1)/2", n=200, seed=6, low=0.1, high=1.4)
    expr = fit_dagsearch(ds, max_skeletons=10_000)
    assert equivalent(expr, parse("cos(x1)/2"))


def test_dagsearch_skeleton_stream_matches_enumeration():
    from srsub.grammar import enumerate_dags
    from srsub.regress import _skeletons

    budget = GrammarBudget(max_intermediary_nodes=1, allow_constants=True)
    direct = list(enumerate_dags(1, budget))
    cached = _skeletons(1, budget, 10_000)
    assert [d.key for d in cached[: len(direct)]] == [d.key for d in direct]


def test_dagsearch_constant_fallback():
    rng = np.random.default_rng(7)
    X = rng.uniform(1, 2, size=(50, 1))
    y = np.full(50, 4.25)
    ds = Dataset.from_arrays(X, y)
    expr = fit_dagsearch(ds, GrammarBudget(max_intermediary_nodes=0, allow_constants=True),
                         max_skeletons=50)
    pred = evaluate(expr, X)
    assert np.allclose(pred, 4.25, atol=1e-9)


# -- external bridge ---------------------------------------------------------------------


def _stub_script(tmp_path, body):
    path = tmp_path / "stub.py"
    path.write_text(textwrap.dedent(body))
    return f"{sys.executable} {path}"


def test_external_echo_stub(tmp_path):
    cmd = _stub_script(tmp_path, """
        print("x1+x2")
    """)
    ds = _dataset("x1+x2", n=60)
    spec = RegressorSpec(kind="external", command=cmd + " {csv}")
    expr = fit_external(ds, spec)
    assert expr == parse("x1+x2")


def test_external_nonzero_exit(tmp_path):
    cmd = _stub_script(tmp_path, """
        import sys
        sys.exit(3)
    """)
    ds = _dataset("x1+x2", n=60)
    with pytest.raises(ExternalFailure):
        fit_external(ds, RegressorSpec(kind="external", command=cmd + " {csv}"))


def test_external_csv_roundtrip_reproduces_nrmse(tmp_path):
    # the stub reads the CSV it is given and prints a known formula; the
    # internally recomputed training NRMSE must match a direct computation
    cmd = _stub_script(tmp_path, """
        import csv, sys
        with open(sys.argv[1]) as fh:
            rows = list(csv.DictReader(fh))
        assert rows and set(rows[0]) == {"x1", "x2", "y"}
        print("x1*x2")
    """)
    ds = _dataset("x1*x2", n=80, seed=8)
    expr = fit_external(ds, RegressorSpec(kind="external", command=cmd + " {csv}"))
    internal = nrmse(ds.y, evaluate(expr, ds.X))
    assert internal == pytest.approx(0.0, abs=1e-12)


def test_external_unparsable_output(tmp_path):
    cmd = _stub_script(tmp_path, """
        print("this is not an expression !!!")
    """)
    ds = _dataset("x1+x2", n=60)
    with pytest.raises(ExternalFailure):
        fit_external(ds, RegressorSpec(kind="external", command=cmd + " {csv}"))


# -- pipeline ----------------------------------------------------------------------------


def test_pipeline_constant_function_resolved_at_root():
    rng = np.random.default_rng(9)
    X = rng.uniform(1, 2, size=(200, 2))
    y = np.full(200, 5.0)
    ds = Dataset.from_arrays(X, y)
    root = SearchNode(dataset=ds, score=None)
    from srsub.depmeasure import DependenceScore

    root.score = DependenceScore(float("-inf"), "codec")
    result = SearchResult(best_path=[root], all_levels=[])
    sol = solve_pipeline(result, RegressorSpec(kind="poly"), holdout_fraction=0.2, seed=1)
    assert sol.source_node_depth == 0
    assert equivalent(sol.expr, parse("5", arity=2))


def test_pipeline_beats_or_matches_root_fit():
    ds = _dataset("x1*x2*x3", n=400, seed=10)
    mask = holdout_mask(ds.n, 0.2, seed=3)
    train = ds.restrict_rows(~mask)
    holdout = (ds.origin_X[mask], ds.origin_y[mask])
    result = search(train, BeamConfig())
    spec = RegressorSpec(kind="poly")
    full = solve_pipeline(result, spec, holdout=holdout)
    root_only = solve_pipeline(SearchResult(best_path=[result.root], all_levels=[]),
                               spec, holdout=holdout)
    assert full.nrmse_test <= root_only.nrmse_test + 1e-12


def test_holdout_mask_deterministic():
    a = holdout_mask(100, 0.2, seed=5)
    b = holdout_mask(100, 0.2, seed=5)
    assert np.array_equal(a, b)
    assert a.sum() == 20


def test_dagsearch_root_only_cannot_recover_washburn():
    # the full formula needs far more operator nodes than the desk-scale
    # skeleton budget admits, so a root-only fit must not reach recovery
    from testdata import WASHBURN, positive_washburn_dataset

    ds = positive_washburn_dataset(n=400, seed=30)
    root = SearchNode(dataset=ds, score=_score_dataset(ds, "codec"))
    result = SearchResult(best_path=[root], all_levels=[])
    sol = solve_pipeline(result, RegressorSpec(kind="dagsearch", max_skeletons=3000),
                         holdout_fraction=0.2, seed=6)
    assert not equivalent(parse(WASHBURN), sol.expr)
