"""Risk data model, data splitting and Hoeffding p-values.

A :class:`RiskTable` holds per-sample losses ``values[sample, hyperparam, risk]``
normalised to ``[0, 1]``.  Constrained risks come first; any remaining risk
columns are auxiliary (optimised best-effort, never tested).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import (
    BadConfig,
    DimensionMismatch,
    EmptySubset,
    EmptyVector,
    OutOfRangeRisk,
    TooFewSamples,
)

# exp() underflows to 0.0 for very strong evidence; report the smallest
# positive double instead so p-values stay in (0, 1].
PVALUE_FLOOR = float(np.nextafter(0.0, 1.0))


@dataclass(frozen=True)
class HyperparamId:
    index: int
    label: str


@dataclass(frozen=True, eq=False)
class RiskTable:
    """Per-sample losses for every (sample, hyperparameter, risk) triple."""

    values: np.ndarray
    labels: tuple[str, ...] = ()
    risk_names: tuple[str, ...] = ()

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim == 2:
            values = values[:, :, None]
        if values.ndim != 3:
            raise DimensionMismatch(
                f"risk values must be 3-d (sample, hyperparam, risk), got shape {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        n, h, l = values.shape
        labels = tuple(self.labels) or tuple(f"h{i}" for i in range(h))
        names = tuple(self.risk_names) or tuple(f"r{i}" for i in range(l))
        if len(labels) != h:
            raise DimensionMismatch(f"{len(labels)} labels for {h} hyperparameters")
        if len(set(labels)) != h:
            raise DimensionMismatch("hyperparameter labels must be unique")
        if len(names) != l:
            raise DimensionMismatch(f"{len(names)} risk names for {l} risks")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "risk_names", names)

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_hyperparams(self) -> int:
        return self.values.shape[1]

    @property
    def n_risks(self) -> int:
        return self.values.shape[2]

    def hyperparam(self, index: int) -> HyperparamId:
        return HyperparamId(index, self.labels[index])


@dataclass(frozen=True)
class SelectionProblem:
    """Constraint targets and FDR level.

    ``alphas[l]`` is the target for constrained risk ``l``; the number of
    constrained risks is ``len(alphas)`` and they occupy the leading risk
    columns of the table.
    """

    alphas: tuple[float, ...]
    delta: float = 0.1
    split_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(float(a) for a in np.atleast_1d(self.alphas)))
        if not self.alphas:
            raise BadConfig("at least one constrained risk (alpha) is required")
        for a in self.alphas:
            if not 0.0 < a < 1.0:
                raise BadConfig(f"alpha must lie in (0, 1), got {a}")
        if not 0.0 < self.delta < 1.0:
            raise BadConfig(f"delta must lie in (0, 1), got {self.delta}")
        if not 0.0 < self.split_fraction < 1.0:
            raise BadConfig(f"split_fraction must lie in (0, 1), got {self.split_fraction}")

    @property
    def n_constrained(self) -> int:
        return len(self.alphas)


@dataclass(frozen=True, eq=False)
class DataSplit:
    opt: np.ndarray
    mht: np.ndarray

    def __post_init__(self):
        for name in ("opt", "mht"):
            arr = np.array(getattr(self, name), dtype=np.intp)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __eq__(self, other):
        return (isinstance(other, DataSplit)
                and np.array_equal(self.opt, other.opt)
                and np.array_equal(self.mht, other.mht))


def validate_risk_table(table: RiskTable, problem: SelectionProblem) -> RiskTable:
    """Check the table against the problem and return it unchanged.

    Raises
    ------
    OutOfRangeRisk
        If any loss is NaN or lies outside ``[0, 1]``.
    BadConfig
        If the problem constrains more risks than the table has.
    DimensionMismatch
        If the table is empty along any axis.
    """
    v = table.values
    if min(v.shape) == 0:
        raise DimensionMismatch(f"risk table has an empty axis: shape {v.shape}")
    if problem.n_constrained > table.n_risks:
        raise BadConfig(
            f"{problem.n_constrained} constrained risks requested but the table has {table.n_risks}")
    bad = ~((v >= 0.0) & (v <= 1.0))
    if bad.any():
        s, h, l = (int(x) for x in np.argwhere(bad)[0])
        raise OutOfRangeRisk(
            f"risk value {float(v[s, h, l])!r} outside [0, 1] at sample {s}, "
            f"hyperparameter {table.labels[h]!r}, risk {table.risk_names[l]!r}")
    return table


def split_data(n_samples: int, fraction: float = 0.5, seed: int = 0) -> DataSplit:
    """Randomly partition ``range(n_samples)`` into OPT and MHT index sets.

    The OPT side has ``round(fraction * n_samples)`` elements (halves round
    up).  Both index arrays are returned sorted.
    """
    if not 0.0 < fraction < 1.0:
        raise BadConfig(f"split fraction must lie in (0, 1), got {fraction}")
    n_opt = int(math.floor(fraction * n_samples + 0.5))
    if n_opt < 1 or n_opt > n_samples - 1:
        raise TooFewSamples(
            f"cannot split {n_samples} samples with fraction {fraction}: one side would be empty")
    perm = np.random.default_rng(seed).permutation(n_samples)
    return DataSplit(np.sort(perm[:n_opt]), np.sort(perm[n_opt:]))


def empirical_risk(table: RiskTable, subset: Sequence[int], hyperparam: int, risk: int) -> float:
    idx = np.asarray(subset, dtype=np.intp)
    if idx.size == 0:
        raise EmptySubset("empirical risk over an empty subset")
    return float(table.values[idx, int(hyperparam), int(risk)].mean())


def hoeffding_pvalue(alpha: float, empirical_risk: float, n: int) -> float:
    """Hoeffding p-value ``exp(-2 n (alpha - empirical_risk)_+^2)``."""
    gap = max(0.0, alpha - empirical_risk)
    return max(math.exp(-2.0 * n * gap * gap), PVALUE_FLOOR)


def hoeffding_pvalues(alphas, risks: np.ndarray, n: int) -> np.ndarray:
    """Vectorised :func:`hoeffding_pvalue`; ``alphas`` broadcasts against the last axis."""
    gap = np.maximum(0.0, np.asarray(alphas, dtype=float) - np.asarray(risks, dtype=float))
    return np.maximum(np.exp(-2.0 * n * gap * gap), PVALUE_FLOOR)


def combined_pvalue(per_risk_pvalues) -> float:
    v = np.asarray(per_risk_pvalues, dtype=float)
    if v.size == 0:
        raise EmptyVector("no per-risk p-values to combine")
    return float(v.max())


@dataclass(frozen=True, eq=False)
class ScopedRisks:
    """Read-only view of a table restricted to one side of a split.

    Every statistic a pipeline stage needs is reached through one of these,
    so code working on the MHT side never touches OPT rows (and vice versa).
    The rows are copied on construction and derived statistics are cached
    per instance.
    """

    table: RiskTable
    indices: np.ndarray
    name: str = "all"
    _rows: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        idx = np.array(self.indices, dtype=np.intp)
        if idx.size == 0:
            raise EmptySubset(f"split side {self.name!r} is empty")
        idx.setflags(write=False)
        rows = self.table.values[idx].copy()
        rows.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "_rows", rows)

    @classmethod
    def full(cls, table: RiskTable) -> "ScopedRisks":
        return cls(table, np.arange(table.n_samples), "all")

    @property
    def n(self) -> int:
        return len(self.indices)

    @property
    def rows(self) -> np.ndarray:
        """Losses on this side, shape ``(n, n_hyperparams, n_risks)``."""
        return self._rows

    @cached_property
    def means(self) -> np.ndarray:
        """Empirical risks, shape ``(n_hyperparams, n_risks)``."""
        return self._rows.mean(axis=0)

    def per_risk_pvalues(self, alphas) -> np.ndarray:
        alphas = tuple(alphas)
        return hoeffding_pvalues(alphas, self.means[:, : len(alphas)], self.n)

    def pvalues(self, alphas) -> np.ndarray:
        """Combined (max over constrained risks) p-value per hyperparameter."""
        return self.per_risk_pvalues(alphas).max(axis=1)
