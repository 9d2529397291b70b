"""End-to-end selection pipelines: RG-PT and the LTT/BH and PT/FST baselines."""

from __future__ import annotations

import enum
import json
import warnings
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np

from .errors import BadConfig, PriorShapeMismatch
from .graph import effective_counts, learn_edges
from .mht import FstConfig, Reshape, default_fst_k, run_bh, run_dagger, run_fst
from .pareto import final_selection, pareto_front
from .ranking import PriorSpec, cluster_depths, default_depth, fit_bt_mm, pairwise_counts
from .risk import RiskTable, ScopedRisks, SelectionProblem, split_data, validate_risk_table

REPORT_VERSION = 1


class Method(str, enum.Enum):
    RGPT = "rgpt"
    LTT_BH = "ltt-bh"
    PT_FST = "pt-fst"

    @classmethod
    def parse(cls, name: "str | Method") -> "Method":
        if isinstance(name, Method):
            return name
        try:
            return cls(str(name).replace("_", "-").lower())
        except ValueError:
            raise BadConfig(f"unknown method {name!r}; choose from rgpt, ltt-bh, pt-fst") from None


@dataclass
class SelectionReport:
    """Everything a selection run produced, in JSON-ready form.

    Hyperparameters are referred to by integer index throughout;
    ``labels[i]`` names index ``i``.  ``pvalues`` holds combined p-values on
    the data used for testing, keyed by the index as a string.
    """

    method: str
    config: dict
    labels: list
    split: dict | None
    pareto_front: list | None
    pvalues: dict
    graph: dict | None
    trace: dict
    discovered: list
    final: list
    diagnostics: dict = field(default_factory=dict)
    version: int = REPORT_VERSION

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "SelectionReport":
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "SelectionReport":
        return cls.from_dict(json.loads(text))

    @property
    def final_labels(self) -> list:
        return [self.labels[i] for i in self.final]


def _base_config(problem: SelectionProblem) -> dict:
    return {
        "alphas": list(problem.alphas),
        "delta": problem.delta,
        "split_fraction": problem.split_fraction,
        "seed": problem.seed,
    }


def _weights_echo(weights):
    return None if weights is None else [float(w) for w in weights]


def align_prior(prior: PriorSpec, table: RiskTable) -> PriorSpec:
    """Reorder a labelled prior to the table's hyperparameter order."""
    if prior.labels:
        missing = [lab for lab in table.labels if lab not in prior.labels]
        if missing:
            raise PriorShapeMismatch(f"prior has no entry for hyperparameters {missing[:5]}")
        pos = {lab: i for i, lab in enumerate(prior.labels)}
        return prior.restrict([pos[lab] for lab in table.labels])
    if prior.size != table.n_hyperparams:
        raise PriorShapeMismatch(
            f"prior covers {prior.size} hyperparameters, table has {table.n_hyperparams}")
    return prior


def run_rgpt(table: RiskTable, problem: SelectionProblem, prior: PriorSpec | None = None,
             depth: int | str | None = None, tau: float = 0.1, reshape: Reshape | str = Reshape.BY,
             weights: Sequence[float] | None = None) -> SelectionReport:
    """Split, Pareto front, reliability graph, DAGGER, final selection.

    ``prior`` is indexed like the table's hyperparameters (or carries
    labels) and is restricted to the Pareto front internally.  ``depth``
    defaults to :func:`rgpt.ranking.default_depth` of the front size, is
    clamped to the front size, and ``"max"`` gives one level per member.
    """
    validate_risk_table(table, problem)
    reshape = Reshape(reshape)
    if not tau > 0:
        raise BadConfig(f"tau must be positive, got {tau}")
    if depth is not None and depth != "max" and (not isinstance(depth, int) or depth < 1):
        raise BadConfig(f"depth must be a positive integer or 'max', got {depth!r}")
    if prior is not None:
        prior = align_prior(prior, table)
    alphas = problem.alphas
    split = split_data(table.n_samples, problem.split_fraction, problem.seed)

    opt = ScopedRisks(table, split.opt, "opt")
    front = pareto_front(opt)
    members = list(front.members)
    p_opt = opt.pvalues(alphas)[members]
    sub_prior = prior.restrict(members) if prior is not None else None
    counts = pairwise_counts(p_opt, sub_prior, opt.n)
    bt = fit_bt_mm(counts)
    if depth is None:
        n_levels = default_depth(len(members))
    elif depth == "max":
        n_levels = len(members)
    else:
        n_levels = depth
    if n_levels > len(members):
        warnings.warn(f"depth {n_levels} exceeds the {len(members)} Pareto-front members; clamped",
                      RuntimeWarning, stacklevel=2)
        n_levels = len(members)
    depths = cluster_depths(bt.s, n_levels, ids=members)
    scores = dict(zip(members, bt.s.tolist()))
    graph = learn_edges(opt, depths, problem.n_constrained, tau, scores)
    eff = effective_counts(graph, exact=True)

    mht = ScopedRisks(table, split.mht, "mht")
    p_mht = mht.pvalues(alphas)
    pv = {n: float(p_mht[n]) for n in members}
    discovered, trace = run_dagger(graph, pv, problem.delta, reshape, eff)
    final = final_selection(discovered, opt, problem, weights)

    config = _base_config(problem) | {
        "method": Method.RGPT.value,
        "depth_requested": depth,
        "depth": n_levels,
        "pseudocount": sub_prior.pseudocount if sub_prior is not None else 0.0,
        "prior": prior is not None,
        "tau": tau,
        "reshape": reshape.value,
        "weights": _weights_echo(weights),
    }
    graph_doc = graph.to_dict()
    graph_doc["effective"] = {
        "v": {str(k): float(v) for k, v in sorted(eff.v.items())},
        "m": {str(k): float(v) for k, v in sorted(eff.m.items())},
        "n_leaves": eff.n_leaves,
    }
    return SelectionReport(
        method=Method.RGPT.value,
        config=config,
        labels=list(table.labels),
        split={"opt": int(split.opt.size), "mht": int(split.mht.size)},
        pareto_front=members,
        pvalues={str(k): v for k, v in pv.items()},
        graph=graph_doc,
        trace=trace.to_dict(),
        discovered=discovered,
        final=final,
        diagnostics={
            "bt_iterations": bt.iterations,
            "bt_converged": bt.converged,
            "bt_degenerate": list(bt.degenerate),
            "opt_pvalues": {str(k): float(p) for k, p in zip(members, p_opt)},
            "lasso_fallback": list(graph.fallback),
        },
    )


def run_ltt(table: RiskTable, problem: SelectionProblem,
            weights: Sequence[float] | None = None) -> SelectionReport:
    """Benjamini-Hochberg over every hyperparameter, using all the data."""
    validate_risk_table(table, problem)
    full = ScopedRisks.full(table)
    p = full.pvalues(problem.alphas)
    discovered, cutoff = run_bh(p, problem.delta)
    final = final_selection(discovered, full, problem, weights)
    return SelectionReport(
        method=Method.LTT_BH.value,
        config=_base_config(problem) | {"method": Method.LTT_BH.value,
                                        "weights": _weights_echo(weights)},
        labels=list(table.labels),
        split=None,
        pareto_front=None,
        pvalues={str(i): float(x) for i, x in enumerate(p)},
        graph=None,
        trace={"cutoff": cutoff, "n_tested": int(p.size)},
        discovered=discovered,
        final=final,
    )


def linear_order(pvalues: dict, members: Sequence[int]) -> list[int]:
    return sorted(members, key=lambda n: (pvalues[n], n))


def run_pt(table: RiskTable, problem: SelectionProblem, k: int | None = None,
           weights: Sequence[float] | None = None) -> SelectionReport:
    """Pareto testing: order the front by OPT p-value, then fixed-sequence test on MHT."""
    validate_risk_table(table, problem)
    alphas = problem.alphas
    split = split_data(table.n_samples, problem.split_fraction, problem.seed)
    opt = ScopedRisks(table, split.opt, "opt")
    front = pareto_front(opt)
    members = list(front.members)
    p_opt_all = opt.pvalues(alphas)
    p_opt = {n: float(p_opt_all[n]) for n in members}
    order = linear_order(p_opt, members)
    k_eff = default_fst_k(len(order)) if k is None else int(k)
    cfg = FstConfig(k_eff, problem.delta)

    mht = ScopedRisks(table, split.mht, "mht")
    p_mht = mht.pvalues(alphas)
    pv = {n: float(p_mht[n]) for n in members}
    discovered, thresholds = run_fst(order, pv, cfg)
    final = final_selection(discovered, opt, problem, weights)
    return SelectionReport(
        method=Method.PT_FST.value,
        config=_base_config(problem) | {"method": Method.PT_FST.value, "k_requested": k,
                                        "k": k_eff, "weights": _weights_echo(weights)},
        labels=list(table.labels),
        split={"opt": int(split.opt.size), "mht": int(split.mht.size)},
        pareto_front=members,
        pvalues={str(n): p for n, p in pv.items()},
        graph=None,
        trace={"order": order, "thresholds": {str(n): t for n, t in thresholds.items()}},
        discovered=sorted(discovered),
        final=final,
        diagnostics={"opt_pvalues": {str(n): p for n, p in p_opt.items()}},
    )


def run_method(method: Method | str, table: RiskTable, problem: SelectionProblem,
               **options: Any) -> SelectionReport:
    """Dispatch to one of the three pipelines.

    Options not used by the chosen method are ignored, so one option set can
    drive all three.
    """
    method = Method.parse(method)
    weights = options.get("weights")
    if method is Method.RGPT:
        return run_rgpt(table, problem, prior=options.get("prior"), depth=options.get("depth"),
                        tau=options.get("tau", 0.1), reshape=options.get("reshape", Reshape.BY),
                        weights=weights)
    if method is Method.LTT_BH:
        return run_ltt(table, problem, weights=weights)
    return run_pt(table, problem, k=options.get("k"), weights=weights)


def report_thresholds(report: SelectionReport) -> dict[int, float]:
    """Threshold each tested hyperparameter was compared against."""
    if report.method == Method.RGPT.value:
        return {d["node"]: d["threshold"] for d in report.trace["decisions"] if d["tested"]}
    if report.method == Method.PT_FST.value:
        return {int(k): v for k, v in report.trace["thresholds"].items()}
    cutoff = report.trace["cutoff"]
    return {int(k): cutoff for k in report.pvalues}


def as_array(report: SelectionReport) -> np.ndarray:
    """Boolean discovery mask over all hyperparameters."""
    mask = np.zeros(len(report.labels), dtype=bool)
    mask[report.discovered] = True
    return mask
