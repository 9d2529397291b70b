"""Pareto front estimation and final multi-objective selection."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import BadWeights, LengthMismatch
from .risk import ScopedRisks, SelectionProblem


@dataclass(frozen=True, eq=False)
class ParetoFront:
    members: tuple[int, ...]
    risk_vectors: np.ndarray

    def __len__(self):
        return len(self.members)


def dominates(a, b) -> bool:
    """True iff ``a <= b`` componentwise with at least one strict inequality."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise LengthMismatch(f"cannot compare risk vectors of shapes {a.shape} and {b.shape}")
    return bool(np.all(a <= b) and np.any(a < b))


def nondominated(vectors: np.ndarray) -> np.ndarray:
    """Indices of rows of ``vectors`` not dominated by any other row.

    Exact O(n^2) filter; rows with identical vectors are all kept.
    """
    v = np.asarray(vectors, dtype=float)
    if v.ndim != 2:
        raise LengthMismatch(f"expected a 2-d array of risk vectors, got shape {v.shape}")
    keep = np.ones(len(v), dtype=bool)
    for i in range(len(v)):
        le = np.all(v <= v[i], axis=1)
        lt = np.any(v < v[i], axis=1)
        keep[i] = not np.any(le & lt)
    return np.flatnonzero(keep)


# Pluggable front solver: takes an (n, L) array, returns kept row indices.
FrontSolver = Callable[[np.ndarray], np.ndarray]


def pareto_front(opt: ScopedRisks, solver: FrontSolver = nondominated) -> ParetoFront:
    """Non-dominated hyperparameters under all empirical risks on ``opt``."""
    means = opt.means
    members = tuple(int(i) for i in np.sort(solver(means)))
    return ParetoFront(members, means[list(members)])


def final_selection(discovered: Iterable[int], scope: ScopedRisks, problem: SelectionProblem,
                    weights: Sequence[float] | None = None) -> list[int]:
    """Rank discovered hyperparameters by their auxiliary risks on ``scope``.

    With one auxiliary risk the whole discovered set is returned sorted by
    its estimate (the first entry is the argmin).  With several, only the
    Pareto subset under the auxiliary risks is returned, ordered by the
    weighted sum when ``weights`` is given and by index otherwise.  Without
    any auxiliary risk the discovered set is returned by index.  Ties always
    go to the lower index.
    """
    found = sorted(set(int(i) for i in discovered))
    aux = scope.means[:, problem.n_constrained:]
    n_aux = aux.shape[1]
    if weights is not None:
        w = np.asarray(weights, dtype=float)
        if w.shape != (n_aux,):
            raise BadWeights(f"expected {n_aux} scalarization weights, got {w.size}")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise BadWeights("scalarization weights must be finite and non-negative")
    if not found or n_aux == 0:
        return found
    sub = aux[found]
    if n_aux == 1:
        order = np.lexsort((found, sub[:, 0]))
        return [found[i] for i in order]
    kept = [found[i] for i in nondominated(sub)]
    if weights is None:
        return kept
    scores = aux[kept] @ w
    order = np.lexsort((kept, scores))
    return [kept[i] for i in order]
