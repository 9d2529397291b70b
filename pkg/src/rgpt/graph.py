"""Reliability graph: edge learning, effective counts and export.

Nodes are hyperparameter indices on the Pareto front.  Edges only connect
depth ``d - 1`` to depth ``d``, so the graph is acyclic by construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .errors import DataError, NoFeatures
from .ranking import DepthAssignment
from .risk import ScopedRisks

KKT_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class ReliabilityGraph:
    nodes: tuple[int, ...]
    depth_of: Mapping[int, int]
    parents: Mapping[int, tuple[int, ...]]
    scores: Mapping[int, float] = field(default_factory=dict)
    labels: Mapping[int, str] = field(default_factory=dict)
    fallback: tuple[int, ...] = ()

    def __post_init__(self):
        nodes = tuple(sorted(int(n) for n in self.nodes))
        depth_of = {int(k): int(v) for k, v in self.depth_of.items()}
        parents = {n: tuple(sorted(int(p) for p in self.parents.get(n, ()))) for n in nodes}
        if set(depth_of) != set(nodes):
            raise DataError("every node needs exactly one depth")
        for child, ps in parents.items():
            for p in ps:
                if p not in depth_of:
                    raise DataError(f"edge from unknown node {p} to {child}")
                if depth_of[p] != depth_of[child] - 1:
                    raise DataError(
                        f"edge {p}->{child} skips levels ({depth_of[p]} -> {depth_of[child]})")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "depth_of", depth_of)
        object.__setattr__(self, "parents", parents)
        object.__setattr__(self, "scores", {int(k): float(v) for k, v in self.scores.items()})
        object.__setattr__(self, "labels", {int(k): str(v) for k, v in self.labels.items()})
        object.__setattr__(self, "fallback", tuple(sorted(self.fallback)))

    @property
    def children(self) -> dict[int, tuple[int, ...]]:
        out: dict[int, list[int]] = {n: [] for n in self.nodes}
        for child, ps in self.parents.items():
            for p in ps:
                out[p].append(child)
        return {n: tuple(sorted(c)) for n, c in out.items()}

    @property
    def n_levels(self) -> int:
        return max(self.depth_of.values(), default=0)

    def level(self, d: int) -> tuple[int, ...]:
        return tuple(n for n in self.nodes if self.depth_of[n] == d)

    @property
    def edges(self) -> list[tuple[int, int]]:
        return sorted((p, c) for c, ps in self.parents.items() for p in ps)

    def to_dict(self) -> dict:
        return {
            "nodes": [
                {"id": n, "label": self.labels.get(n, str(n)), "depth": self.depth_of[n],
                 "score": self.scores.get(n), "parents": list(self.parents[n])}
                for n in sorted(self.nodes, key=lambda k: (self.depth_of[k], k))
            ],
            "fallback": list(self.fallback),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ReliabilityGraph":
        nodes = [d["id"] for d in data["nodes"]]
        return cls(
            nodes=tuple(nodes),
            depth_of={d["id"]: d["depth"] for d in data["nodes"]},
            parents={d["id"]: tuple(d["parents"]) for d in data["nodes"]},
            scores={d["id"]: d["score"] for d in data["nodes"] if d.get("score") is not None},
            labels={d["id"]: d["label"] for d in data["nodes"]},
            fallback=tuple(data.get("fallback", ())),
        )


@dataclass(frozen=True, eq=False)
class EffectiveCounts:
    v: dict
    m: dict
    n_leaves: int


@dataclass(frozen=True, eq=False)
class LassoSolution:
    beta: np.ndarray
    objective: float
    active_set: tuple[int, ...]
    kkt_residual: float
    sweeps: int


def lasso_objective(X: np.ndarray, y: np.ndarray, beta: np.ndarray, tau: float) -> float:
    resid = y - X @ beta
    return float(resid @ resid + tau * beta.sum())


def lasso_gradient(G: np.ndarray, c: np.ndarray, beta: np.ndarray, tau: float) -> np.ndarray:
    return 2.0 * (G @ beta - c) + tau


def kkt_residual(grad: np.ndarray, beta: np.ndarray) -> float:
    """Largest violation of the non-negative Lasso optimality conditions."""
    if beta.size == 0:
        return 0.0
    viol = np.where(beta > 0, np.abs(grad), np.maximum(0.0, -grad))
    return float(viol.max())


def nonneg_lasso(targets, features, tau: float, max_sweeps: int = 10_000,
                 step_tol: float = 1e-8, kkt_tol: float = 1e-8) -> LassoSolution:
    """Solve ``min_{beta >= 0} ||y - X beta||^2 + tau * sum(beta)``.

    Parameters
    ----------
    targets : array, shape (n, L)
        Child risks per sample.
    features : array, shape (n, P, L)
        Risks of the ``P`` candidate parents per sample.
    tau : float
        L1 penalty weight, > 0.

    Cyclic coordinate descent in ascending parent order; stops once the
    largest coordinate move is below ``step_tol`` and the KKT residual is
    below ``kkt_tol``.  The final iterate is polished by solving the normal
    equations on its active set, kept only if that lowers the KKT residual
    without leaving the feasible region.  No intercept, no standardisation.
    """
    y = np.asarray(targets, dtype=float)
    F = np.asarray(features, dtype=float)
    if F.ndim == 2:
        F = F[:, :, None]
    if y.ndim == 1:
        y = y[:, None]
    n, P, L = F.shape
    if P == 0:
        raise NoFeatures("no candidate parents to regress on")
    if y.shape != (n, L):
        raise DataError(f"targets shape {y.shape} does not match features {F.shape}")
    if not tau > 0:
        raise DataError(f"tau must be positive, got {tau}")
    X = F.transpose(0, 2, 1).reshape(n * L, P)
    yv = y.reshape(n * L)
    G = X.T @ X
    c = X.T @ yv
    diag = np.diag(G).copy()

    beta = np.zeros(P)
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        biggest = 0.0
        for k in range(P):
            if diag[k] <= 0:
                continue
            partial = c[k] - G[k] @ beta + diag[k] * beta[k]
            new = max(0.0, (partial - 0.5 * tau) / diag[k])
            biggest = max(biggest, abs(new - beta[k]))
            beta[k] = new
        if biggest < step_tol and kkt_residual(lasso_gradient(G, c, beta, tau), beta) < kkt_tol:
            break

    resid = kkt_residual(lasso_gradient(G, c, beta, tau), beta)
    active = np.flatnonzero(beta > 0)
    if active.size:
        sub = np.linalg.lstsq(G[np.ix_(active, active)], c[active] - 0.5 * tau, rcond=None)[0]
        if np.all(sub > 0):
            polished = np.zeros(P)
            polished[active] = sub
            r2 = kkt_residual(lasso_gradient(G, c, polished, tau), polished)
            if r2 < resid:
                beta, resid = polished, r2

    return LassoSolution(
        beta=beta,
        objective=lasso_objective(X, yv, beta, tau),
        active_set=tuple(int(k) for k in np.flatnonzero(beta > 0)),
        kkt_residual=resid,
        sweeps=sweeps,
    )


def _fallback_parent(child_vec: np.ndarray, parent_vecs: np.ndarray, parent_ids: Sequence[int]) -> int:
    best, best_corr = parent_ids[0], -np.inf
    cstd = child_vec.std()
    for pid, vec in zip(parent_ids, parent_vecs):
        pstd = vec.std()
        if cstd == 0 or pstd == 0:
            continue
        corr = float(np.mean((child_vec - child_vec.mean()) * (vec - vec.mean())) / (cstd * pstd))
        if corr > best_corr:
            best, best_corr = pid, corr
    return best


def learn_edges(opt: ScopedRisks, depths: DepthAssignment, n_constrained: int, tau: float = 0.1,
                scores: Mapping[int, float] | None = None) -> ReliabilityGraph:
    """Choose each node's parents from the previous level by non-negative Lasso.

    Only the constrained risks enter the regression.  A node whose Lasso
    solution is all zero gets the single previous-level node with the
    highest Pearson correlation to it (ties and undefined correlations go
    to the lowest index); such nodes are listed in ``graph.fallback``.
    """
    rows = opt.rows[:, :, :n_constrained]
    parents: dict[int, tuple[int, ...]] = {}
    fallback = []
    for d in range(1, depths.n_levels):
        cand = sorted(depths.clusters[d - 1])
        feats = rows[:, cand, :]
        for child in depths.clusters[d]:
            sol = nonneg_lasso(rows[:, child, :], feats, tau)
            if sol.active_set:
                parents[child] = tuple(cand[k] for k in sol.active_set)
            else:
                n = rows.shape[0]
                child_vec = rows[:, child, :].reshape(n * n_constrained)
                parent_vecs = feats.transpose(1, 0, 2).reshape(len(cand), n * n_constrained)
                parents[child] = (_fallback_parent(child_vec, parent_vecs, cand),)
                fallback.append(child)
    nodes = tuple(n for c in depths.clusters for n in c)
    labels = {n: opt.table.labels[n] for n in nodes}
    return ReliabilityGraph(nodes, depths.depth_of, parents, scores or {}, labels, tuple(fallback))


def effective_counts(graph: ReliabilityGraph, exact: bool = False) -> EffectiveCounts:
    """Effective leaf and node counts, accumulated from the deepest level up.

    ``exact=True`` returns :class:`fractions.Fraction` values.
    """
    one = Fraction(1) if exact else 1.0
    children = graph.children
    v: dict = {}
    m: dict = {}
    for node in sorted(graph.nodes, key=lambda k: (-graph.depth_of[k], k)):
        kids = children[node]
        if not kids:
            v[node] = one
            m[node] = one
            continue
        v[node] = sum((v[j] / len(graph.parents[j]) for j in kids), 0 * one)
        m[node] = one + sum((m[j] / len(graph.parents[j]) for j in kids), 0 * one)
    n_leaves = sum(1 for n in graph.nodes if not children[n])
    return EffectiveCounts(v, m, n_leaves)


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def _num(x) -> str:
    return "null" if x is None else repr(float(x))


def export_graph(graph: ReliabilityGraph, counts: EffectiveCounts | None = None,
                 pvalues: Mapping[int, float] | None = None) -> tuple[str, str]:
    """Render the graph as DOT text and as an equivalent JSON document."""
    counts = counts or effective_counts(graph)
    pvalues = pvalues or {}
    order = sorted(graph.nodes, key=lambda k: (graph.depth_of[k], k))
    records = []
    for n in order:
        records.append({
            "id": n,
            "label": graph.labels.get(n, str(n)),
            "depth": graph.depth_of[n],
            "score": graph.scores.get(n),
            "pvalue": pvalues.get(n),
            "v": float(counts.v[n]),
            "m": float(counts.m[n]),
            "parents": list(graph.parents[n]),
        })

    lines = ["digraph reliability_graph {", "  rankdir=TB;"]
    for r in records:
        label = (f"{_dot_escape(r['label'])}\\ndepth={r['depth']} score={_num(r['score'])} "
                 f"p={_num(r['pvalue'])}")
        lines.append(
            f'  n{r["id"]} [label="{label}", depth={r["depth"]}, score={_num(r["score"])}, '
            f'pvalue={_num(r["pvalue"])}, v={_num(r["v"])}, m={_num(r["m"])}];')
    for p, c in graph.edges:
        lines.append(f"  n{p} -> n{c};")
    lines.append("}")
    dot = "\n".join(lines) + "\n"

    doc = {
        "nodes": records,
        "edges": [list(e) for e in graph.edges],
        "n_leaves": counts.n_leaves,
        "fallback": list(graph.fallback),
    }
    return dot, json.dumps(doc, indent=2, sort_keys=True) + "\n"
