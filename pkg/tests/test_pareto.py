import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rgpt.errors import BadWeights, LengthMismatch
from rgpt.pareto import dominates, final_selection, nondominated, pareto_front
from rgpt.risk import RiskTable, ScopedRisks, SelectionProblem


def brute_front(v):
    """Every row that no other row beats on all coordinates with one strict."""
    out = []
    for i, a in enumerate(v):
        if not any(all(b[k] <= a[k] for k in range(len(a))) and any(b[k] < a[k] for k in range(len(a)))
                   for j, b in enumerate(v) if j != i):
            out.append(i)
    return out


def scoped(means):
    """A one-sample table whose empirical risks are exactly ``means``."""
    m = np.asarray(means, dtype=float)
    return ScopedRisks.full(RiskTable(m[None, :, :]))


@pytest.mark.parametrize("a,b,expected", [((0.2, 0.2), (0.3, 0.3), True), ((0.2, 0.2), (0.2, 0.2), False),
                                          ((0.1, 0.9), (0.9, 0.1), False), ((0.2, 0.3), (0.2, 0.4), True)])
def test_dominates(a, b, expected):
    assert dominates(a, b) is expected


def test_dominates_length_mismatch():
    with pytest.raises(LengthMismatch):
        dominates((0.1,), (0.1, 0.2))


def test_front_examples():
    vecs = [(0.1, 0.9), (0.2, 0.2), (0.9, 0.1)]
    assert list(pareto_front(scoped(vecs)).members) == [0, 1, 2]
    assert list(pareto_front(scoped(vecs + [(0.3, 0.3)])).members) == [0, 1, 2]
    assert list(pareto_front(scoped([(0.4, 0.4)])).members) == [0]


def test_front_keeps_duplicates():
    assert list(nondominated(np.array([[0.2, 0.2], [0.2, 0.2], [0.3, 0.3]]))) == [0, 1]


@settings(max_examples=200)
@given(arrays(float, st.tuples(st.integers(1, 12), st.integers(1, 3)),
              elements=st.sampled_from([0.0, 0.1, 0.25, 0.5, 0.75, 1.0])))
def test_front_matches_brute_force(v):
    assert list(nondominated(v)) == brute_front(v.tolist())


@settings(max_examples=100)
@given(arrays(float, st.tuples(st.integers(1, 10), st.integers(1, 3)), elements=st.floats(0, 1)))
def test_front_members_mutually_nondominated(v):
    f = nondominated(v)
    assert f.size >= 1
    for i, j in itertools.permutations(f, 2):
        assert not dominates(v[i], v[j])
    for k in set(range(len(v))) - set(f):
        assert any(dominates(v[i], v[k]) for i in f)


def test_final_selection_single_aux():
    sc = scoped([[0.1, 0.5], [0.1, 0.3], [0.1, 0.3]])
    prob = SelectionProblem((0.2,))
    assert final_selection([0, 1, 2], sc, prob) == [1, 2, 0]
    assert final_selection([], sc, prob) == []


def test_final_selection_two_aux_weighted():
    sc = scoped([[0.1, 0.1, 0.9], [0.1, 0.9, 0.1], [0.1, 0.95, 0.95]])
    prob = SelectionProblem((0.2,))
    assert final_selection([0, 1, 2], sc, prob, weights=(1, 0)) == [0, 1]
    assert final_selection([0, 1, 2], sc, prob, weights=(0, 1)) == [1, 0]
    assert final_selection([1, 0, 2], sc, prob) == [0, 1]


def test_final_selection_no_aux_returns_index_order():
    sc = scoped([[0.1], [0.2], [0.05]])
    assert final_selection([2, 0], sc, SelectionProblem((0.3,))) == [0, 2]


@pytest.mark.parametrize("weights", [(1.0,), (1.0, -1.0), (np.nan, 1.0)])
def test_bad_weights(weights):
    sc = scoped([[0.1, 0.1, 0.9]])
    with pytest.raises(BadWeights):
        final_selection([0], sc, SelectionProblem((0.2,)), weights=weights)


@settings(max_examples=100)
@given(arrays(float, st.tuples(st.integers(1, 10), st.integers(1, 3)), elements=st.floats(0, 0.9)),
       st.floats(0, 0.1))
def test_adding_dominated_point_keeps_front(v, eps):
    before = set(nondominated(v).tolist())
    worse = v[0] + 0.1 + eps
    after = set(nondominated(np.vstack([v, worse])).tolist())
    assert after == before
