"""Reliability-graph Pareto testing for multi-objective hyperparameter selection.

The pipeline splits calibration data in two: one half finds the Pareto
front and learns a layered reliability graph over it, the other half tests
the graph with a DAG-aware FDR procedure.  Baselines (Benjamini-Hochberg
over everything, fixed-sequence testing along the front) share the same
report format.
"""

from .errors import ConfigError, DataError, RgptError
from .graph import ReliabilityGraph, effective_counts, export_graph, learn_edges, nonneg_lasso
from .mht import Reshape, fst_thresholds, run_bh, run_dagger, run_fst
from .pareto import ParetoFront, final_selection, nondominated, pareto_front
from .pipeline import Method, SelectionReport, run_ltt, run_method, run_pt, run_rgpt
from .ranking import PriorSpec, cluster_depths, fit_bt_mm, pairwise_counts
from .risk import (DataSplit, RiskTable, ScopedRisks, SelectionProblem, combined_pvalue,
                   hoeffding_pvalue, hoeffding_pvalues, split_data)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DataError", "RgptError",
    "ReliabilityGraph", "effective_counts", "export_graph", "learn_edges", "nonneg_lasso",
    "Reshape", "fst_thresholds", "run_bh", "run_dagger", "run_fst",
    "ParetoFront", "final_selection", "nondominated", "pareto_front",
    "Method", "SelectionReport", "run_ltt", "run_method", "run_pt", "run_rgpt",
    "PriorSpec", "cluster_depths", "fit_bt_mm", "pairwise_counts",
    "DataSplit", "RiskTable", "ScopedRisks", "SelectionProblem", "combined_pvalue",
    "hoeffding_pvalue", "hoeffding_pvalues", "split_data",
]
