"""Monte Carlo validation harness.

Synthetic risk tables with known true means let us measure the realised
false discovery proportion of every selection method, sweep the graph depth
and the quality of prior information, and cross-check DAGGER against an
independent from-definitions implementation (:func:`oracle_dagger`).
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from typing import Any, Sequence

import numpy as np

from .errors import BadConfig, BadFraction, DataError, TooLarge
from .pipeline import Method, run_method
from .ranking import PriorSpec
from .risk import RiskTable, SelectionProblem


@dataclass(frozen=True, eq=False)
class SyntheticSpec:
    """Ground truth for a synthetic risk table.

    ``true_means`` has shape ``(n_hyperparams, n_constrained)`` and
    ``aux_means`` shape ``(n_hyperparams, n_aux)`` (``n_aux`` may be 0).
    With ``correlation="shared_noise"`` each sample carries one latent
    uniform per risk that is shared across hyperparameters with weight
    ``rho``.
    """

    true_means: np.ndarray
    aux_means: np.ndarray | None = None
    correlation: str = "independent"
    rho: float = 0.0
    n_samples: int = 500
    seed: int = 0

    def __post_init__(self):
        tm = np.atleast_2d(np.asarray(self.true_means, dtype=float))
        if tm.shape[0] == 1 and np.ndim(self.true_means) == 1:
            tm = tm.T
        am = (np.zeros((tm.shape[0], 0)) if self.aux_means is None
              else np.asarray(self.aux_means, dtype=float).reshape(tm.shape[0], -1))
        for name, arr in (("true_means", tm), ("aux_means", am)):
            if np.any((arr < 0) | (arr > 1)) or np.any(~np.isfinite(arr)):
                raise DataError(f"{name} must lie in [0, 1]")
        if self.correlation not in ("independent", "shared_noise"):
            raise BadConfig(f"unknown correlation {self.correlation!r}")
        if not 0.0 <= self.rho <= 1.0:
            raise BadConfig(f"rho must lie in [0, 1], got {self.rho}")
        if self.n_samples < 2:
            raise BadConfig("need at least two samples")
        object.__setattr__(self, "true_means", tm)
        object.__setattr__(self, "aux_means", am)

    @property
    def n_hyperparams(self) -> int:
        return self.true_means.shape[0]

    def reliable(self, alphas: Sequence[float]) -> np.ndarray:
        """Ground-truth reliability: every constrained mean at or below its target."""
        return np.all(self.true_means <= np.asarray(alphas, dtype=float), axis=1)

    def to_dict(self) -> dict:
        return {"true_means": self.true_means.tolist(), "aux_means": self.aux_means.tolist(),
                "correlation": self.correlation, "rho": self.rho,
                "n_samples": self.n_samples, "seed": self.seed}


def _sum_uniform_cdf(s: np.ndarray, a: float, b: float) -> np.ndarray:
    """CDF of ``a*U1 + b*U2`` for independent standard uniforms, ``a, b >= 0``."""
    lo, hi = min(a, b), max(a, b)
    if lo == 0:
        return np.clip(s / hi, 0.0, 1.0)
    out = np.where(s <= lo, s * s / (2 * a * b),
                   np.where(s <= hi, (s - lo / 2) / hi, 1 - (a + b - s) ** 2 / (2 * a * b)))
    return np.clip(out, 0.0, 1.0)


def gen_synthetic(spec: SyntheticSpec, rng: np.random.Generator | None = None) -> RiskTable:
    """Draw a Bernoulli 0/1 loss table from ``spec``.

    Shared noise mixes an idiosyncratic uniform with a per-(sample, risk)
    uniform shared across hyperparameters, then maps the mixture back to a
    uniform through its exact CDF, so every marginal mean is exactly the
    requested one.
    """
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    n, h = spec.n_samples, spec.n_hyperparams
    means = spec.true_means
    lc = means.shape[1]
    own = rng.random((n, h, lc))
    if spec.correlation == "shared_noise" and spec.rho > 0:
        shared = rng.random((n, 1, lc))
        u = _sum_uniform_cdf((1 - spec.rho) * own + spec.rho * shared, 1 - spec.rho, spec.rho)
    else:
        u = own
    losses = (u < means[None, :, :]).astype(float)
    if spec.aux_means.shape[1]:
        aux = (rng.random((n, h, spec.aux_means.shape[1])) < spec.aux_means[None]).astype(float)
        losses = np.concatenate([losses, aux], axis=2)
    return RiskTable(losses)


@dataclass(frozen=True)
class TrialOutcome:
    trial: int
    discovered: tuple[int, ...]
    false_discoveries: int
    fdp: float
    power: float
    final: tuple[int, ...] = ()


@dataclass
class FdrReport:
    method: str
    trials: int
    fdr: float
    se: float
    power: float
    power_se: float
    fdp_quantiles: dict
    records: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["records"] = [
            {"trial": r.trial, "discovered": list(r.discovered), "false_discoveries": r.false_discoveries,
             "fdp": r.fdp, "power": r.power, "final": list(r.final)}
            for r in self.records
        ]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["trial", "n_discovered", "false_discoveries", "fdp", "power", "first_final"])
        for r in self.records:
            w.writerow([r.trial, len(r.discovered), r.false_discoveries, repr(r.fdp), repr(r.power),
                        r.final[0] if r.final else ""])
        return buf.getvalue()

    def within_target(self, delta: float, n_se: float = 3.0) -> bool:
        return self.fdr <= delta + n_se * self.se


def score_trial(trial: int, discovered: Sequence[int], truth: np.ndarray,
                final: Sequence[int] = ()) -> TrialOutcome:
    disc = tuple(sorted(int(i) for i in discovered))
    false = sum(1 for i in disc if not truth[i])
    n_true = int(truth.sum())
    power = (len(disc) - false) / n_true if n_true else 0.0
    return TrialOutcome(trial, disc, false, false / max(len(disc), 1), power, tuple(final))


def trial_seeds(seed: int, trials: int) -> list[tuple[int, int, int]]:
    """Per-trial (data, split, prior-corruption) seeds, independent of scheduling."""
    out = []
    for child in np.random.SeedSequence(seed).spawn(trials):
        a, b, c = child.generate_state(3, dtype=np.uint32)
        out.append((int(a), int(b), int(c)))
    return out


def corrupt_priors(prior: PriorSpec, f: float, seed: int = 0) -> PriorSpec:
    """Swap ``eta[i, j]`` and ``eta[j, i]`` for each pair independently with probability ``f``."""
    if not 0.0 <= f <= 1.0:
        raise BadFraction(f"corruption fraction must lie in [0, 1], got {f}")
    n = prior.size
    flip = np.triu(np.random.default_rng(seed).random((n, n)) < f, k=1)
    flip = flip | flip.T
    eta = np.where(flip, prior.eta.T, prior.eta)
    return PriorSpec(eta, prior.pseudocount, prior.labels)


def true_order_prior(spec: SyntheticSpec, pseudocount: float) -> PriorSpec:
    """Prior that orders hyperparameters by their worst true constrained mean.

    Uses the p-value orientation of :mod:`rgpt.ranking`: ``eta[i, j] = 1``
    when ``i`` is truly *less* reliable than ``j``, 0.5 on ties.
    """
    worst = spec.true_means.max(axis=1)
    eta = np.where(worst[:, None] > worst[None, :], 1.0,
                   np.where(worst[:, None] < worst[None, :], 0.0, 0.5))
    return PriorSpec(eta, pseudocount)


@dataclass
class Scenario:
    """A synthetic spec plus everything needed to run a method on it."""

    name: str
    spec: SyntheticSpec
    problem: SelectionProblem
    prior: PriorSpec | None = None
    corruption: float = 0.0

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "spec": self.spec.to_dict(),
            "alphas": list(self.problem.alphas),
            "delta": self.problem.delta,
            "split_fraction": self.problem.split_fraction,
            "pseudocount": self.prior.pseudocount if self.prior is not None else 0.0,
            "corruption": self.corruption,
        }


def _one_trial(args) -> TrialOutcome:
    scenario, method, options, t, seeds = args
    data_seed, split_seed, prior_seed = seeds
    table = gen_synthetic(scenario.spec, np.random.default_rng(data_seed))
    problem = replace(scenario.problem, seed=split_seed)
    opts = dict(options)
    if scenario.prior is not None and "prior" not in opts:
        prior = scenario.prior
        if scenario.corruption > 0:
            prior = corrupt_priors(prior, scenario.corruption, prior_seed)
        opts["prior"] = prior
    report = run_method(method, table, problem, **opts)
    truth = scenario.spec.reliable(problem.alphas)
    return score_trial(t, report.discovered, truth, report.final)


def aggregate(method: str, outcomes: Sequence[TrialOutcome], config: dict) -> FdrReport:
    recs = sorted(outcomes, key=lambda r: r.trial)
    fdp = np.array([r.fdp for r in recs])
    power = np.array([r.power for r in recs])
    n = len(recs)
    se = float(fdp.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    pse = float(power.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    q = {f"q{int(p * 100):02d}": float(np.quantile(fdp, p)) for p in (0.5, 0.9, 0.99)}
    return FdrReport(method, n, math.fsum(fdp) / n, se, math.fsum(power) / n, pse, q, recs, config)


def run_trials(scenario: Scenario, method: Method | str, trials: int, jobs: int = 1,
               **options: Any) -> FdrReport:
    """Run ``trials`` fresh synthetic tables through one method and aggregate FDP/power.

    Trial ``t`` always sees the same data and split for a given scenario
    seed, whatever ``jobs`` is and whatever method options are used.
    """
    if trials < 1:
        raise BadConfig("need at least one trial")
    method = Method.parse(method)
    seeds = trial_seeds(scenario.spec.seed, trials)
    work = [(scenario, method, options, t, seeds[t]) for t in range(trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_one_trial, work, chunksize=max(1, trials // (4 * jobs))))
    else:
        outcomes = [_one_trial(w) for w in work]
    config = scenario.to_dict() | {"method": method.value, "trials": trials,
                                   "options": _echo(options)}
    return aggregate(method.value, outcomes, config)


def _echo(options: dict) -> dict:
    out = {}
    for k, v in sorted(options.items()):
        if isinstance(v, PriorSpec):
            out[k] = {"pseudocount": v.pseudocount, "size": v.size}
        elif hasattr(v, "value"):
            out[k] = v.value
        else:
            out[k] = v
    return out


def sweep_depth(scenario: Scenario, depths: Sequence[int | str], trials: int, jobs: int = 1,
                **options: Any) -> list[FdrReport]:
    """RG-PT at each requested depth (``"max"`` = one level per front member)."""
    return [run_trials(scenario, Method.RGPT, trials, jobs, **(options | {"depth": d}))
            for d in depths]


def sweep_corruption(scenario: Scenario, fractions: Sequence[float], trials: int, jobs: int = 1,
                     **options: Any) -> list[FdrReport]:
    if scenario.prior is None:
        raise BadConfig("prior-corruption sweep needs a scenario with a prior")
    for f in fractions:
        if not 0.0 <= f <= 1.0:
            raise BadFraction(f"corruption fraction must lie in [0, 1], got {f}")
    return [run_trials(replace(scenario, corruption=float(f)), Method.RGPT, trials, jobs, **options)
            for f in fractions]


def sweep_csv(reports: Sequence[FdrReport], key: str, values: Sequence) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([key, "trials", "fdr", "se", "power", "power_se"])
    for v, r in zip(values, reports):
        w.writerow([v, r.trials, repr(r.fdr), repr(r.se), repr(r.power), repr(r.power_se)])
    return buf.getvalue()


# --- scenario batteries ---------------------------------------------------------------------

HARD_NULL, EASY_NULL = 0.05, 0.3
NEAR_ALT, FAR_ALT = -0.1, -0.3


def mixed_means(alpha: float, n_hyperparams: int = 20) -> np.ndarray:
    """Constrained means cycling through hard/easy nulls and near/far alternatives."""
    offsets = [HARD_NULL, EASY_NULL, NEAR_ALT, FAR_ALT]
    per = [offsets[i % 4] for i in range(n_hyperparams)]
    return np.clip(alpha + np.sort(per), 0.0, 1.0)[:, None]


def standard_battery(alpha: float = 0.35, n_hyperparams: int = 20, n_samples: int = 500,
                     delta: float = 0.1, seed: int = 0) -> dict[str, Scenario]:
    """The scenario set used for FDR certification.

    Auxiliary cost falls as the constrained risk rises, so reliable
    hyperparameters are expensive and the Pareto front stays populated.
    """
    problem = SelectionProblem((alpha,), delta)
    mixed = mixed_means(alpha, n_hyperparams)
    aux = np.clip(0.95 - mixed, 0.0, 1.0)
    all_null = np.clip(alpha + np.where(np.arange(n_hyperparams) % 2, HARD_NULL, EASY_NULL),
                       0.0, 1.0)[:, None]
    all_null_aux = np.clip(0.95 - all_null, 0.0, 1.0)
    spec = SyntheticSpec(mixed, aux, n_samples=n_samples, seed=seed)
    return {
        "all_null": Scenario("all_null", SyntheticSpec(all_null, all_null_aux, n_samples=n_samples,
                                                       seed=seed), problem),
        "mixed": Scenario("mixed", spec, problem),
        "correlated": Scenario("correlated", replace(spec, correlation="shared_noise", rho=0.5),
                               problem),
        "structured_prior": Scenario("structured_prior", spec, problem,
                                     prior=true_order_prior(spec, 1000.0)),
    }


def load_scenario(data: dict) -> Scenario:
    """Build a :class:`Scenario` from its JSON description.

    ``{"battery": "<name>"}`` picks a member of :func:`standard_battery`
    (its keyword overrides may sit alongside); otherwise ``true_means`` and
    ``alphas`` are required and ``prior`` may be ``"true_order"``.
    """
    data = dict(data)
    if "battery" in data:
        kwargs = {k: data[k] for k in ("alpha", "n_hyperparams", "n_samples", "delta", "seed")
                  if k in data}
        battery = standard_battery(**kwargs)
        name = data["battery"]
        if name not in battery:
            raise BadConfig(f"unknown battery scenario {name!r}; choose from {sorted(battery)}")
        sc = battery[name]
        if "corruption" in data:
            sc = replace(sc, corruption=float(data["corruption"]))
        return sc
    try:
        spec = SyntheticSpec(
            true_means=np.asarray(data["true_means"], dtype=float),
            aux_means=None if data.get("aux_means") is None else np.asarray(data["aux_means"]),
            correlation=data.get("correlation", "independent"),
            rho=float(data.get("rho", 0.0)),
            n_samples=int(data.get("n_samples", 500)),
            seed=int(data.get("seed", 0)),
        )
        problem = SelectionProblem(tuple(data["alphas"]), float(data.get("delta", 0.1)),
                                   float(data.get("split_fraction", 0.5)))
    except KeyError as exc:
        raise BadConfig(f"scenario is missing field {exc.args[0]!r}") from None
    prior = None
    if data.get("prior") == "true_order":
        prior = true_order_prior(spec, float(data.get("pseudocount", 1000.0)))
    elif data.get("prior") not in (None, "none"):
        raise BadConfig(f"unknown prior kind {data['prior']!r}")
    return Scenario(data.get("name", "custom"), spec, problem, prior,
                    float(data.get("corruption", 0.0)))


# --- independent DAGGER oracle --------------------------------------------------------------

ORACLE_MAX_NODES = 12


def oracle_dagger(graph, pvalues, delta: float, reshape: str = "by") -> set[int]:
    """DAGGER written straight from its definitions, in exact rational arithmetic.

    Reads only ``graph.nodes``, ``graph.depth_of`` and ``graph.parents`` and
    shares no code with :mod:`rgpt.mht` or the graph module, so it can serve
    as a cross-check.
    """
    nodes = list(graph.nodes)
    if len(nodes) > ORACLE_MAX_NODES:
        raise TooLarge(f"oracle handles at most {ORACLE_MAX_NODES} nodes, got {len(nodes)}")
    depth = dict(graph.depth_of)
    par = {n: list(graph.parents.get(n, ())) for n in nodes}
    kids = {n: [c for c in nodes if n in par[c]] for n in nodes}

    v, m = {}, {}

    def fill(i):
        if i in v:
            return
        if not kids[i]:
            v[i], m[i] = Fraction(1), Fraction(1)
            return
        for j in kids[i]:
            fill(j)
        v[i] = sum(Fraction(v[j]) / len(par[j]) for j in kids[i])
        m[i] = 1 + sum(Fraction(m[j]) / len(par[j]) for j in kids[i])

    for i in nodes:
        fill(i)
    leaves = sum(1 for i in nodes if not kids[i])
    harmonic = sum(Fraction(1, k) for k in range(1, leaves + 1))
    dlt = Fraction(delta)

    def beta(x):
        return x / harmonic if reshape == "by" else x

    def thresh(i, r, prev):
        return v[i] / leaves * dlt / beta(m[i] + r + prev - 1)

    reliable: set[int] = set()
    unreliable: set[int] = set()
    prev = 0
    for d in sorted(set(depth.values())):
        level = [i for i in nodes if depth[i] == d]
        tested = [i for i in level if all(p in reliable for p in par[i])]
        best = 0
        for r in range(1, len(level) + 1):
            if sum(1 for i in tested if Fraction(pvalues[i]) <= thresh(i, r, prev)) >= r:
                best = r
        for i in tested:
            if best > 0 and Fraction(pvalues[i]) <= thresh(i, best, prev):
                reliable.add(i)
            else:
                unreliable.add(i)
        prev = len(reliable)
    return reliable


def random_layered_dag(rng: np.random.Generator, max_nodes: int = ORACLE_MAX_NODES):
    """Random levelled DAG: every non-root has a non-empty parent set one level up.

    Returns ``(nodes, depth_of, parents)``.
    """
    n = int(rng.integers(1, max_nodes + 1))
    n_levels = int(rng.integers(1, n + 1))
    cuts = np.sort(rng.choice(np.arange(1, n), size=n_levels - 1, replace=False)) if n_levels > 1 else []
    sizes = np.diff(np.concatenate([[0], cuts, [n]])).astype(int)
    perm = rng.permutation(n)
    levels, start = [], 0
    for s in sizes:
        levels.append(sorted(int(x) for x in perm[start:start + s]))
        start += s
    depth_of, parents = {}, {}
    for d, level in enumerate(levels, start=1):
        for node in level:
            depth_of[node] = d
            if d > 1:
                prev = levels[d - 2]
                k = int(rng.integers(1, len(prev) + 1))
                parents[node] = tuple(sorted(int(x) for x in rng.choice(prev, size=k, replace=False)))
    return tuple(range(n)), depth_of, parents
