from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from rgpt.errors import DataError, NoFeatures
from rgpt.graph import (KKT_TOL, ReliabilityGraph, effective_counts, export_graph, kkt_residual,
                        lasso_gradient, lasso_objective, learn_edges, nonneg_lasso)
from rgpt.ranking import DepthAssignment
from rgpt.risk import RiskTable, ScopedRisks
from rgpt.simulate import random_layered_dag


def graph(levels, edges, labels=None):
    depth_of = {n: d for d, lv in enumerate(levels, start=1) for n in lv}
    parents = {}
    for p, c in edges:
        parents.setdefault(c, []).append(p)
    return ReliabilityGraph(tuple(depth_of), depth_of, parents, labels=labels or {})


LEAF = graph([[0]], [])
CHAIN = graph([[0], [1], [2]], [(0, 1), (1, 2)])
DIAMOND = graph([[0], [1, 2], [3]], [(0, 1), (0, 2), (1, 3), (2, 3)])


def design(features):
    n, P, L = features.shape
    return features.transpose(0, 2, 1).reshape(n * L, P)


# --- non-negative Lasso ------------------------------------------------------------------


def test_lasso_picks_copied_parent(rng):
    a = (rng.random((200, 1)) < 0.4).astype(float)
    other = 1.0 - a  # orthogonal to a under the uncentred inner product
    sol = nonneg_lasso(a, np.stack([a, other], axis=1), tau=0.01)
    assert sol.beta[0] > 0 and sol.beta[1] == 0
    assert sol.active_set == (0,)
    assert sol.kkt_residual < KKT_TOL


def test_lasso_zero_threshold(rng):
    F = (rng.random((50, 3, 2)) < 0.5).astype(float)
    y = (rng.random((50, 2)) < 0.5).astype(float)
    c = design(F).T @ y.reshape(-1)
    tau0 = 2 * c.max()
    assert np.all(nonneg_lasso(y, F, tau0).beta == 0)
    assert np.any(nonneg_lasso(y, F, tau0 * 0.99).beta > 0)


def test_lasso_zero_targets(rng):
    F = rng.random((20, 4, 1))
    assert np.all(nonneg_lasso(np.zeros((20, 1)), F, 0.1).beta == 0)


def test_lasso_input_errors():
    with pytest.raises(NoFeatures):
        nonneg_lasso(np.zeros((5, 1)), np.zeros((5, 0, 1)), 0.1)
    with pytest.raises(DataError):
        nonneg_lasso(np.zeros((5, 1)), np.zeros((5, 2, 1)), 0.0)
    with pytest.raises(DataError):
        nonneg_lasso(np.zeros((4, 1)), np.zeros((5, 2, 1)), 0.1)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(1, 3), st.floats(1e-3, 20))
def test_lasso_matches_generic_bounded_solver(seed, P, L, tau):
    r = np.random.default_rng(seed)
    F = (r.random((40, P, L)) < r.random((1, P, 1))).astype(float)
    y = (r.random((40, L)) < 0.5).astype(float)
    sol = nonneg_lasso(y, F, tau)
    X, yv = design(F), y.reshape(-1)
    assert sol.objective == pytest.approx(lasso_objective(X, yv, sol.beta, tau), abs=1e-9)
    ref = minimize(lambda b: lasso_objective(X, yv, b, tau), np.full(P, 0.1),
                   jac=lambda b: -2 * X.T @ (yv - X @ b) + tau, bounds=[(0, None)] * P,
                   method="L-BFGS-B", options={"ftol": 1e-14, "gtol": 1e-12})
    assert sol.objective <= ref.fun + 1e-7 * max(1.0, abs(ref.fun))
    assert np.all(sol.beta >= 0)


def test_kkt_residual_definition():
    grad = np.array([0.5, -0.2, 0.3])
    beta = np.array([1.0, 0.0, 0.0])
    assert kkt_residual(grad, beta) == pytest.approx(0.5)
    assert kkt_residual(np.array([0.1, -0.4]), np.zeros(2)) == pytest.approx(0.4)


def test_monotone_screening_over_tau_grid():
    taus = np.geomspace(1e-3, 100, 25)
    for seed in range(30):
        r = np.random.default_rng(seed)
        F = (r.random((80, 5, 1)) < 0.3).astype(float)
        y = (r.random((80, 1)) < 0.3).astype(float)
        prev = None
        for tau in taus:
            active = set(nonneg_lasso(y, F, tau).active_set)
            if prev is not None:
                assert active <= prev, (seed, tau)
            prev = active


# --- learned graphs --------------------------------------------------------------------


def cycle_free(g):
    """Kahn's algorithm, independent of the depth bookkeeping."""
    indeg = {n: len(g.parents[n]) for n in g.nodes}
    kids = {n: [c for c in g.nodes if n in g.parents[c]] for n in g.nodes}
    queue = [n for n, d in indeg.items() if d == 0]
    seen = 0
    while queue:
        n = queue.pop()
        seen += 1
        for c in kids[n]:
            indeg[c] -= 1
            if indeg[c] == 0:
                queue.append(c)
    return seen == len(g.nodes)


def test_learn_edges_copy_parent(rng):
    base = (rng.random((300, 3)) < 0.5).astype(float)
    vals = np.concatenate([base, base[:, [1]]], axis=1)
    opt = ScopedRisks.full(RiskTable(vals[:, :, None]))
    g = learn_edges(opt, DepthAssignment(((0, 1, 2), (3,))), 1, tau=0.1)
    assert g.parents[3] == (1,)
    assert g.fallback == ()


def test_learn_edges_single_level():
    opt = ScopedRisks.full(RiskTable(np.ones((10, 3, 1))))
    g = learn_edges(opt, DepthAssignment(((0, 1, 2),)), 1)
    assert g.edges == []


def test_learn_edges_fallback_uses_correlation(rng):
    n = 400
    a = (rng.random(n) < 0.5).astype(float)
    b = (rng.random(n) < 0.5).astype(float)
    child = np.where(rng.random(n) < 0.8, b, 1 - b)
    vals = np.stack([a, b, child], axis=1)[:, :, None]
    opt = ScopedRisks.full(RiskTable(vals))
    g = learn_edges(opt, DepthAssignment(((0, 1), (2,))), 1, tau=1e6)
    assert g.parents[2] == (1,)
    assert g.fallback == (2,)


def test_learn_edges_fallback_undefined_correlation_takes_lowest():
    vals = np.zeros((20, 3, 1))
    vals[::2, 2, 0] = 1.0
    opt = ScopedRisks.full(RiskTable(vals))
    g = learn_edges(opt, DepthAssignment(((1, 0), (2,))), 1, tau=1.0)
    assert g.parents[2] == (0,)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 5))
def test_learned_graph_structure(seed, levels):
    r = np.random.default_rng(seed)
    H = 12
    vals = (r.random((60, H, 2)) < r.random((1, H, 2))).astype(float)
    opt = ScopedRisks.full(RiskTable(vals))
    order = r.permutation(H)
    cuts = np.sort(r.choice(np.arange(1, H), levels - 1, replace=False))
    clusters = tuple(tuple(int(x) for x in c) for c in np.split(order, cuts))
    g = learn_edges(opt, DepthAssignment(clusters), 2, tau=0.1)
    assert cycle_free(g)
    for n in g.nodes:
        d = g.depth_of[n]
        assert (len(g.parents[n]) == 0) == (d == 1)
        assert all(g.depth_of[p] == d - 1 for p in g.parents[n])


def test_graph_rejects_level_skip():
    with pytest.raises(DataError, match="skips"):
        ReliabilityGraph((0, 1), {0: 1, 1: 3}, {1: (0,)})


# --- effective counts ------------------------------------------------------------------


def test_counts_leaf():
    c = effective_counts(LEAF, exact=True)
    assert (c.v[0], c.m[0], c.n_leaves) == (1, 1, 1)


def test_counts_chain():
    c = effective_counts(CHAIN, exact=True)
    assert [(c.v[i], c.m[i]) for i in (2, 1, 0)] == [(1, 1), (1, 2), (1, 3)]
    assert c.n_leaves == 1


def test_counts_diamond():
    c = effective_counts(DIAMOND, exact=True)
    half = Fraction(1, 2)
    assert (c.v[3], c.m[3]) == (1, 1)
    assert (c.v[1], c.m[1]) == (half, Fraction(3, 2))
    assert (c.v[2], c.m[2]) == (half, Fraction(3, 2))
    assert (c.v[0], c.m[0]) == (1, 4)
    assert c.n_leaves == 1


def test_float_counts_match_exact():
    rng = np.random.default_rng(5)
    for _ in range(50):
        nodes, depth_of, parents = random_layered_dag(rng)
        g = ReliabilityGraph(nodes, depth_of, parents)
        a, b = effective_counts(g), effective_counts(g, exact=True)
        for n in g.nodes:
            assert a.v[n] == pytest.approx(float(b.v[n]), rel=1e-12)
            assert a.m[n] == pytest.approx(float(b.m[n]), rel=1e-12)


def test_counts_on_trees_count_subtree():
    rng = np.random.default_rng(9)
    for _ in range(50):
        nodes, depth_of, parents = random_layered_dag(rng)
        parents = {c: ps[:1] for c, ps in parents.items()}
        g = ReliabilityGraph(nodes, depth_of, parents)
        c = effective_counts(g, exact=True)
        kids = g.children

        def subtree(n):
            out = {n}
            for k in kids[n]:
                out |= subtree(k)
            return out

        for root in g.level(1):
            sub = subtree(root)
            assert c.v[root] == sum(1 for n in sub if not kids[n])
            assert c.m[root] == len(sub)


# --- export ------------------------------------------------------------------------------


def test_export_empty_graph():
    g = ReliabilityGraph((), {}, {})
    dot, doc = export_graph(g)
    assert dot.startswith("digraph") and dot.rstrip().endswith("}")
    assert '"nodes": []' in doc


def test_export_chain_and_determinism():
    dot, doc = export_graph(CHAIN, pvalues={0: 0.01, 1: 0.02, 2: 0.5})
    assert dot.count("->") == 2
    assert export_graph(CHAIN, pvalues={0: 0.01, 1: 0.02, 2: 0.5}) == (dot, doc)


def test_export_escapes_labels():
    g = graph([[0]], [], labels={0: 'say "hi"\\'})
    dot, _ = export_graph(g)
    assert 'say \\"hi\\"\\\\' in dot


def test_graph_dict_round_trip():
    g = ReliabilityGraph.from_dict(DIAMOND.to_dict())
    assert g.edges == DIAMOND.edges and g.depth_of == DIAMOND.depth_of
