"""Pairwise counts, Bradley-Terry scores and depth assignment.

Orientation: the data-driven probability ``p_i / (p_i + p_j)`` grows with
``p_i``, so fitted scores are proportional to p-values and a *low* score means
*high* expected reliability.  Depth 1 therefore holds the lowest scores.
Priors must be supplied on the same scale (``eta[i, j]`` near 1 when ``i`` is
expected to be *less* reliable than ``j``); :meth:`PriorSpec.flipped`
converts from the opposite convention.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DataError, PriorShapeMismatch

SCORE_FLOOR = 1e-12  # items that never win
TINY = float(np.finfo(float).tiny)
ANTISYMMETRY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class PriorSpec:
    """Pairwise prior probabilities ``eta`` with pseudocount ``n_p``.

    ``labels`` (optional) name the rows/columns so a prior written for the
    full candidate set can be restricted to the Pareto front.
    """

    eta: np.ndarray
    pseudocount: float = 0.0
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        eta = np.array(self.eta, dtype=float)
        if eta.ndim != 2 or eta.shape[0] != eta.shape[1]:
            raise PriorShapeMismatch(f"prior matrix must be square, got shape {eta.shape}")
        np.fill_diagonal(eta, 0.0)
        off = ~np.eye(len(eta), dtype=bool)
        if np.any(~np.isfinite(eta)) or np.any((eta < 0) | (eta > 1)):
            raise DataError("prior probabilities must lie in [0, 1]")
        if np.any(np.abs(eta + eta.T - 1.0)[off] > ANTISYMMETRY_TOL):
            i, j = np.argwhere((np.abs(eta + eta.T - 1.0) > ANTISYMMETRY_TOL) & off)[0]
            raise DataError(
                f"prior is not antisymmetric: eta[{i},{j}] + eta[{j},{i}] = {eta[i, j] + eta[j, i]}")
        if not self.pseudocount >= 0:
            raise DataError(f"pseudocount must be non-negative, got {self.pseudocount}")
        if self.labels and len(self.labels) != len(eta):
            raise PriorShapeMismatch(f"{len(self.labels)} labels for a {len(eta)}x{len(eta)} prior")
        eta.setflags(write=False)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "pseudocount", float(self.pseudocount))

    @classmethod
    def uninformative(cls, n: int) -> "PriorSpec":
        eta = np.full((n, n), 0.5)
        return cls(eta, 0.0)

    @property
    def size(self) -> int:
        return len(self.eta)

    def restrict(self, members: Sequence[int]) -> "PriorSpec":
        m = list(members)
        labels = tuple(self.labels[i] for i in m) if self.labels else ()
        return PriorSpec(self.eta[np.ix_(m, m)], self.pseudocount, labels)

    def flipped(self) -> "PriorSpec":
        """Swap the orientation (``eta[i, j] <-> eta[j, i]``)."""
        return PriorSpec(self.eta.T.copy(), self.pseudocount, self.labels)


@dataclass(frozen=True, eq=False)
class PairwiseCounts:
    w: np.ndarray

    def __post_init__(self):
        w = np.array(self.w, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise PriorShapeMismatch(f"count matrix must be square, got shape {w.shape}")
        if np.any(~np.isfinite(w)) or np.any(w < 0):
            raise DataError("pairwise counts must be finite and non-negative")
        np.fill_diagonal(w, 0.0)
        w.setflags(write=False)
        object.__setattr__(self, "w", w)


@dataclass(frozen=True, eq=False)
class BtScores:
    s: np.ndarray
    converged: bool
    iterations: int
    degenerate: tuple[int, ...] = ()
    loglik_history: tuple[float, ...] = ()


@dataclass(frozen=True)
class DepthAssignment:
    """Ordered clusters; ``clusters[0]`` is depth 1 (most reliable)."""

    clusters: tuple[tuple[int, ...], ...]
    depth_of: dict = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        clusters = tuple(tuple(int(i) for i in c) for c in self.clusters)
        object.__setattr__(self, "clusters", clusters)
        object.__setattr__(self, "depth_of",
                           {node: d for d, c in enumerate(clusters, start=1) for node in c})

    @property
    def n_levels(self) -> int:
        return len(self.clusters)


def data_prob(p_i: float, p_j: float) -> float:
    total = p_i + p_j
    if total == 0:
        return 0.5
    return p_i / total


def data_prob_matrix(pvalues) -> np.ndarray:
    p = np.asarray(pvalues, dtype=float)
    total = p[:, None] + p[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(total > 0, p[:, None] / np.where(total > 0, total, 1.0), 0.5)
    return out


def pairwise_counts(pvalues_opt, prior: PriorSpec | None, n_opt: int) -> PairwiseCounts:
    """``w[i, j] = n_opt * p_i / (p_i + p_j) + n_p * eta[i, j]`` off the diagonal."""
    p = np.asarray(pvalues_opt, dtype=float)
    w = n_opt * data_prob_matrix(p)
    if prior is not None:
        if prior.size != len(p):
            raise PriorShapeMismatch(
                f"prior covers {prior.size} hyperparameters but {len(p)} p-values were given")
        if prior.pseudocount > 0:
            w = w + prior.pseudocount * prior.eta
    return PairwiseCounts(w)


def bt_loglik(w: np.ndarray, s: np.ndarray) -> float:
    s = np.asarray(s, dtype=float)
    ratio = s[:, None] / (s[:, None] + s[None, :])
    mask = w > 0
    return float(np.sum(w[mask] * np.log(ratio[mask])))


def _log_ratio_start(w: np.ndarray) -> np.ndarray:
    both = (w > 0) & (w.T > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        logr = np.where(both, np.log(np.where(both, w, 1.0) / np.where(both, w.T, 1.0)), 0.0)
    lap = np.diag(both.sum(axis=1).astype(float)) - both
    theta = np.linalg.lstsq(lap, logr.sum(axis=1), rcond=None)[0]
    s = np.exp(theta - theta.max())
    s = np.maximum(s / s.sum(), TINY)
    return s / s.sum()


def _newton_step(w: np.ndarray, s: np.ndarray, free: np.ndarray, floor: np.ndarray):
    """One damped Newton ascent step on log-scores of the ``free`` items.

    Returns the new scores, or ``None`` when no step increases the
    log-likelihood.
    """
    games = w + w.T
    sig = s[:, None] / (s[:, None] + s[None, :])
    grad = w.sum(axis=1) - (games * sig).sum(axis=1)
    curv = games * sig * sig.T
    neg_hess = np.diag(curv.sum(axis=1)) - curv
    idx = np.flatnonzero(free)
    step = np.zeros(len(s))
    step[idx] = np.linalg.lstsq(neg_hess[np.ix_(idx, idx)], grad[idx], rcond=1e-12)[0]
    base = bt_loglik(w, s)
    theta = np.log(s)
    t = 1.0
    for _ in range(40):
        cand = np.exp(theta + t * step - np.max(theta + t * step))
        cand = np.maximum(cand / cand.sum(), floor)
        cand /= cand.sum()
        if bt_loglik(w, cand) >= base:
            return cand
        t *= 0.5
    return None


def fit_bt_mm(counts: PairwiseCounts, tol: float = 1e-8, max_iter: int = 1000,
              track_loglik: bool = False, init: str = "log-ratio",
              patience: int = 50) -> BtScores:
    """Fit Bradley-Terry scores with Hunter's MM iteration.

    The iteration starts from the least-squares fit of
    ``log s_i - log s_j = log(w_ij / w_ji)`` (``init="log-ratio"``) or from
    uniform scores (``init="uniform"``).  Each sweep applies
    ``s_i <- W_i / sum_j N_ij / (s_i + s_j)`` with ``W_i = sum_j w_ij`` and
    ``N_ij = w_ij + w_ji``, floors items without any win at ``SCORE_FLOOR``
    (others only at the smallest normal double) and renormalises to sum
    one.  Iteration stops when the largest relative score change drops
    below ``tol``.

    Nearly separable counts make MM crawl; after ``patience`` sweeps
    without convergence the remaining iterations are damped Newton steps on
    the log-scores, accepted only when the log-likelihood does not drop.

    Items that take part in no comparison keep ``SCORE_FLOOR`` and are
    listed in ``degenerate``.  Hitting ``max_iter`` returns the last iterate
    with ``converged=False``; both situations also emit a warning.
    """
    w = counts.w
    n = len(w)
    if n == 0:
        return BtScores(np.empty(0), True, 0)
    if n == 1:
        return BtScores(np.ones(1), True, 0)
    wins = w.sum(axis=1)
    games = w + w.T
    involved = games.sum(axis=1) > 0
    degenerate = tuple(int(i) for i in np.flatnonzero(~involved))
    if degenerate:
        warnings.warn(f"items {list(degenerate)} take part in no comparison; given floor score",
                      RuntimeWarning, stacklevel=2)

    floor = np.where(wins > 0, TINY, SCORE_FLOOR)
    s = _log_ratio_start(w) if init == "log-ratio" else np.full(n, 1.0 / n)
    s = np.maximum(s, floor)
    s /= s.sum()
    history = [bt_loglik(w, s)] if track_loglik else []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        new = None
        if it > patience:
            new = _newton_step(w, s, wins > 0, floor)
        if new is None:
            denom = (games / (s[:, None] + s[None, :])).sum(axis=1)
            new = np.where(involved, wins / np.where(denom > 0, denom, 1.0), 0.0)
        new = np.maximum(new, floor)
        new /= new.sum()
        change = float(np.max(np.abs(new - s) / s))
        s = new
        if track_loglik:
            history.append(bt_loglik(w, s))
        if change < tol:
            converged = True
            break
    if not converged:
        warnings.warn(f"Bradley-Terry MM did not converge in {max_iter} iterations",
                      RuntimeWarning, stacklevel=2)
    return BtScores(s, converged, it, degenerate, tuple(history))


def default_depth(n_nodes: int) -> int:
    d = math.ceil(n_nodes / 5)
    if n_nodes >= 3:
        d = min(max(d, 2), n_nodes - 1)
    return max(d, 1) if n_nodes else 0


def cluster_depths(scores, n_levels: int, ids: Sequence[int] | None = None) -> DepthAssignment:
    """Average-linkage agglomerative clustering of scalar scores into levels.

    For scalar data every cluster is an interval of the sorted scores, and
    the average linkage between two neighbouring intervals is the
    difference of their means, so only neighbours need comparing.  Ties
    merge the pair containing the lowest member index.  Levels come out in
    ascending score order.

    ``n_levels`` above the number of items is clamped with a warning.
    """
    s = np.asarray(scores.s if isinstance(scores, BtScores) else scores, dtype=float)
    n = len(s)
    ids = list(range(n)) if ids is None else [int(i) for i in ids]
    if len(ids) != n:
        raise DataError(f"{len(ids)} ids for {n} scores")
    if n == 0:
        return DepthAssignment(())
    if n_levels < 1:
        raise DataError(f"number of levels must be at least 1, got {n_levels}")
    if n_levels > n:
        warnings.warn(f"depth {n_levels} exceeds {n} nodes; clamped", RuntimeWarning, stacklevel=2)
        n_levels = n

    order = sorted(range(n), key=lambda k: (s[k], ids[k]))
    # Each cluster: [sum, count, min_id, members]
    clusters = [[s[k], 1, ids[k], [k]] for k in order]
    while len(clusters) > n_levels:
        best = None
        for a in range(len(clusters) - 1):
            left, right = clusters[a], clusters[a + 1]
            dist = right[0] / right[1] - left[0] / left[1]
            key = (dist, min(left[2], right[2]))
            if best is None or key < best[0]:
                best = (key, a)
        a = best[1]
        left, right = clusters[a], clusters.pop(a + 1)
        left[0] += right[0]
        left[1] += right[1]
        left[2] = min(left[2], right[2])
        left[3].extend(right[3])
    return DepthAssignment(tuple(tuple(sorted(ids[k] for k in c[3])) for c in clusters))
