"""FDR-controlling testing procedures: DAGGER, fixed-sequence testing and BH."""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import BadK, DataError
from .graph import EffectiveCounts, ReliabilityGraph, effective_counts


class Reshape(str, enum.Enum):
    IDENTITY = "identity"
    BY = "by"


def harmonic(n: int) -> float:
    return math.fsum(1.0 / k for k in range(1, n + 1))


def by_reshape(x: float, n_leaves: int) -> float:
    """Benjamini-Yekutieli reshaping: ``x`` divided by the ``n_leaves``-th harmonic number."""
    if n_leaves < 1:
        raise DataError(f"BY reshaping needs at least one leaf, got {n_leaves}")
    return x / harmonic(n_leaves)


def reshape_value(kind: Reshape | str, x: float, n_leaves: int) -> float:
    kind = Reshape(kind)
    if kind is Reshape.IDENTITY:
        return x
    return by_reshape(x, n_leaves)


@dataclass
class TestDecision:
    node: int
    tested: bool
    threshold: float | None
    pvalue: float
    reliable: bool

    __test__ = False  # not a pytest class


@dataclass
class LevelRecord:
    depth: int
    candidates: list[int]
    R: int
    cumulative: int
    thresholds: dict[int, float]


@dataclass
class DaggerTrace:
    levels: list[LevelRecord] = field(default_factory=list)
    decisions: dict[int, TestDecision] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "levels": [
                {"depth": lv.depth, "candidates": lv.candidates, "R": lv.R,
                 "cumulative": lv.cumulative,
                 "thresholds": {str(k): v for k, v in sorted(lv.thresholds.items())}}
                for lv in self.levels
            ],
            "decisions": [asdict(self.decisions[k]) for k in sorted(self.decisions)],
        }


@dataclass(frozen=True)
class FstConfig:
    k: int
    delta: float


def default_fst_k(n_total: int) -> int:
    return max(1, math.ceil(0.1 * n_total))


def dagger_threshold(node: int, r: int, rejections_before: int, counts: EffectiveCounts,
                     delta: float, reshape: Reshape | str = Reshape.BY) -> float:
    """``(v_i / V) * delta / reshape(m_i + r + R_prev - 1)``."""
    if r < 1:
        raise DataError(f"step-up rank r must be >= 1, got {r}")
    v = float(counts.v[node])
    m = float(counts.m[node])
    V = counts.n_leaves
    return (v / V) * delta / reshape_value(reshape, m + r + rejections_before - 1, V)


def dagger_stepup(candidates: Sequence[int], pvalues: Mapping[int, float], rejections_before: int,
                  counts: EffectiveCounts, delta: float, reshape: Reshape | str = Reshape.BY):
    """Pick the largest ``r`` whose thresholds admit at least ``r`` rejections.

    Returns ``(R, reliable, thresholds)`` where ``thresholds`` are evaluated
    at ``R`` (or at ``r = 1`` when ``R = 0``, for reporting only) and
    ``reliable`` maps each candidate to its decision.
    """
    cands = list(candidates)
    R = 0
    for r in range(len(cands), 0, -1):
        hits = sum(pvalues[i] <= dagger_threshold(i, r, rejections_before, counts, delta, reshape)
                   for i in cands)
        if hits >= r:
            R = r
            break
    at = max(R, 1)
    thresholds = {i: dagger_threshold(i, at, rejections_before, counts, delta, reshape)
                  for i in cands}
    reliable = {i: R > 0 and pvalues[i] <= thresholds[i] for i in cands}
    return R, reliable, thresholds


def run_dagger(graph: ReliabilityGraph, pvalues: Mapping[int, float], delta: float,
               reshape: Reshape | str = Reshape.BY, counts: EffectiveCounts | None = None):
    """Test the graph level by level, skipping nodes with any rejected-as-unreliable parent.

    Returns ``(discovered, trace)``; ``discovered`` is a sorted list.
    """
    counts = counts or effective_counts(graph)
    trace = DaggerTrace()
    reliable: set[int] = set()
    cumulative = 0
    for d in range(1, graph.n_levels + 1):
        level = graph.level(d)
        cands = [n for n in level if all(p in reliable for p in graph.parents[n])]
        R, ok, thresholds = dagger_stepup(cands, pvalues, cumulative, counts, delta, reshape)
        for n in level:
            if n in ok:
                trace.decisions[n] = TestDecision(n, True, thresholds[n], float(pvalues[n]), ok[n])
            else:
                trace.decisions[n] = TestDecision(n, False, None, float(pvalues[n]), False)
        found = [n for n in cands if ok[n]]
        reliable.update(found)
        cumulative += len(found)
        trace.levels.append(LevelRecord(d, cands, R, cumulative, thresholds))
    return sorted(reliable), trace


def fst_thresholds(n_total: int, cfg: FstConfig) -> np.ndarray:
    """Critical levels for fixed-sequence testing with ``k`` allowed failures."""
    k, delta = cfg.k, cfg.delta
    if not 1 <= k <= n_total:
        raise BadK(f"k must satisfy 1 <= k <= {n_total}, got {k}")
    i = np.arange(1, n_total + 1)
    later = (n_total - k + 1) * delta / ((n_total - i + 1) * k)
    return np.where(i <= k, delta / k, later)


def run_fst(ordered: Sequence[int], pvalues: Mapping[int, float], cfg: FstConfig):
    """Scan ``ordered`` (most reliable first) until ``k`` failures.

    Returns ``(discovered, thresholds)``; ``thresholds`` maps every tested
    hyperparameter to its critical level.
    """
    ordered = list(ordered)
    if not ordered:
        return [], {}
    levels = fst_thresholds(len(ordered), cfg)
    found, tested = [], {}
    failures = 0
    for pos, h in enumerate(ordered):
        tested[h] = float(levels[pos])
        if pvalues[h] <= levels[pos]:
            found.append(h)
        else:
            failures += 1
            if failures >= cfg.k:
                break
    return found, tested


def run_bh(pvalues, delta: float):
    """Benjamini-Hochberg step-up over an array of p-values.

    Returns ``(discovered_indices, cutoff)`` where ``cutoff`` is ``i * delta / n``
    for the largest passing rank ``i`` (0.0 when nothing is rejected).
    """
    p = np.asarray(pvalues, dtype=float)
    n = p.size
    if n == 0:
        return [], 0.0
    order = np.argsort(p, kind="stable")
    ranks = np.arange(1, n + 1)
    passing = np.flatnonzero(p[order] <= ranks * delta / n)
    if passing.size == 0:
        return [], 0.0
    last = passing[-1]
    cut = p[order][last]
    return [int(i) for i in np.flatnonzero(p <= cut)], float((last + 1) * delta / n)
