"""Candidate generation, dataset transforms, and substitution verification."""

import numpy as np
import pytest

from srsub import (
    Dataset,
    GrammarBudget,
    InputSub,
    OutInputSub,
    codec,
    parse,
    sample_problem,
    verify_input_sub,
    verify_outinput_sub,
)
from srsub.bench import Problem
from srsub.errors import TooFewRows, Unverifiable
from srsub.substitution import (
    aifeynman_candidates,
    apply_input,
    apply_outinput,
    gen_input_candidates,
    gen_outinput_candidates,
)

WASHBURN = "sqrt(x1*x2*x3*cos(x4)/(2*x5))"


def _math_comb(n, k):
    import math

    return math.comb(n, k)


# -- generation ------------------------------------------------------------------


def test_input_candidates_include_four_classics():
    budget = GrammarBudget(max_intermediary_nodes=0,
                           allowed_ops=frozenset({"+", "-", "*", "/"}))
    subs = list(gen_input_candidates(2, budget))
    texts = {(s.I, s.g.key) for s in subs}
    for t in ("x1+x2", "x1*x2", "x1-x2", "x1/x2"):
        assert ((0, 1), parse(t).key) in texts


def test_input_candidates_exclude_single_variable_dags():
    budget = GrammarBudget(max_intermediary_nodes=0,
                           allowed_ops=frozenset({"+", "-", "*", "/"}))
    for s in gen_input_candidates(2, budget):
        assert s.g.var_indices() == {0, 1}


def test_triple_product_candidate_present_at_one_intermediary():
    budget = GrammarBudget(max_intermediary_nodes=1)
    found = False
    for s in gen_input_candidates(5, budget):
        if len(s.I) == 3 and s.g == parse("x1*(x2*x3)"):
            found = True
            break
    assert found


def test_outinput_candidates_require_output_slot():
    budget = GrammarBudget(max_intermediary_nodes=1)
    subs = list(gen_outinput_candidates(3, budget))
    assert subs, "expected out-input candidates"
    for s in subs:
        y_slot = len(s.I)
        assert s.h.var_tree_occurrences(y_slot) == 1
    keys = {s.h.key for s in subs if len(s.I) == 1}
    assert parse("x2/sqrt(x1)", arity=2).key in keys  # y / sqrt(x)
    assert parse("x2*sqrt(x1)", arity=2).key in keys  # y * sqrt(x)
    assert parse("x2/x1", arity=2).key in keys        # y / x


def test_aifeynman_mode_counts():
    for d in (3, 5):
        subs = list(aifeynman_candidates(d))
        assert len(subs) == 4 * _math_comb(d, 2)


# -- application ------------------------------------------------------------------


def _washburn_dataset(n=400, seed=5):
    p = Problem(id="w", d=5, f_true=parse(WASHBURN))
    return sample_problem(p, n, seed)


def test_apply_input_product_triple():
    ds = _washburn_dataset()
    sub = InputSub(g=parse("x1*(x2*x3)"), I=(0, 1, 2))
    out = apply_input(ds, sub)
    assert out.d == 3
    assert out.var_map[0] == parse("x1*(x2*x3)", arity=5)
    assert np.allclose(out.X[:, 0], ds.X[:, 0] * ds.X[:, 1] * ds.X[:, 2])
    out.validate()


def test_apply_input_drops_domain_violations():
    X = np.array([[1.0, 0.0], [2.0, 1.0], [3.0, 2.0], [4.0, 4.0], [5.0, 8.0]])
    y = np.arange(5.0) + 1
    ds = Dataset.from_arrays(X, y)
    sub = InputSub(g=parse("x1/x2"), I=(0, 1))
    out = apply_input(ds, sub)
    assert out.n == 4  # the x2 = 0 row dropped
    assert out.drop_fraction == pytest.approx(0.2)
    out.validate()


def test_apply_input_too_many_drops():
    X = np.column_stack([np.full(10, 2.0), np.concatenate([np.zeros(5), np.ones(5)])])
    ds = Dataset.from_arrays(X, np.arange(10.0) + 1)
    with pytest.raises(TooFewRows):
        apply_input(ds, InputSub(g=parse("x1/x2"), I=(0, 1)))


def test_apply_outinput_composes_output_map():
    from testdata import positive_washburn_dataset

    ds = positive_washburn_dataset()
    sub = InputSub(g=parse("x1*(x2*x3)"), I=(0, 1, 2))
    step2 = apply_input(ds, sub)
    h = OutInputSub(h=parse("x2/sqrt(x1)", arity=2), I=(0,))
    step3 = apply_outinput(step2, h)
    assert step3.d == 2
    assert np.allclose(step3.y, step2.y / np.sqrt(step2.X[:, 0]))
    step3.validate()
    # compose once more: multiply by sqrt of the (now second) column = x5
    h2 = OutInputSub(h=parse("x2*sqrt(x1)", arity=2), I=(1,))
    step4 = apply_outinput(step3, h2)
    assert step4.d == 1
    step4.validate()
    expect = ds.y * np.sqrt(ds.X[:, 4] / (ds.X[:, 0] * ds.X[:, 1] * ds.X[:, 2]))
    assert np.allclose(step4.y, expect, rtol=1e-9)


def test_apply_outinput_constant_output_is_scorable_reject():
    X = np.column_stack([np.linspace(1, 2, 50), np.linspace(3, 4, 50)])
    y = X[:, 0].copy()
    ds = Dataset.from_arrays(X, y)
    out = apply_outinput(ds, OutInputSub(h=parse("x2-x1", arity=2), I=(0,)))
    from srsub.substitution import near_constant

    assert near_constant(out.y)


def test_valid_input_sub_keeps_codec_score():
    ds = _washburn_dataset(n=600, seed=9)
    before = codec(ds.X, ds.y).value
    out = apply_input(ds, InputSub(g=parse("x1*(x2*x3)"), I=(0, 1, 2)))
    after = codec(out.X, out.y).value
    assert after >= before - 0.05


# -- verification -----------------------------------------------------------------


def test_verify_input_product_valid():
    f = parse("x1*x2+x3")
    assert verify_input_sub(f, InputSub(g=parse("x1*x2"), I=(0, 1))) is True


def test_verify_input_sum_invalid():
    f = parse("x1*x2+x3")
    assert verify_input_sub(f, InputSub(g=parse("x1+x2"), I=(0, 1))) is False


def test_verify_input_washburn_triple():
    f = parse(WASHBURN)
    assert verify_input_sub(f, InputSub(g=parse("x1*(x2*x3)"), I=(0, 1, 2))) is True


def test_verify_input_unverifiable():
    f = parse("x1+x2")
    sub = InputSub(g=parse("sin(x1)+sin(x2)"), I=(0, 1))
    with pytest.raises(Unverifiable):
        verify_input_sub(f, sub)


def test_verify_outinput_difference_valid():
    f = parse("x1*x2+x3")
    h = OutInputSub(h=parse("x2-x1", arity=2), I=(2,))  # y - x3
    assert verify_outinput_sub(f, h) is True


def test_verify_outinput_ratio_invalid():
    f = parse("x1*x2+x3")
    h = OutInputSub(h=parse("x2/x1", arity=2), I=(2,))  # y / x3
    assert verify_outinput_sub(f, h) is False


def test_verify_outinput_three_variable_example():
    f = parse("x1*x2*x3+x1*(x2+log(x2))/x3")
    h = OutInputSub(h=parse("x2/x1", arity=2), I=(0,))  # y / x1
    assert verify_outinput_sub(f, h) is True
