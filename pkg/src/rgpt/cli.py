"""Command-line front end: ``rgpt select | validate | export-graph``.

Exit codes: 0 on success (an empty selection is a success), 2 for
configuration problems, 3 for data problems.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .errors import BadConfig, ConfigError, DataError
from .graph import ReliabilityGraph, effective_counts, export_graph
from .io import file_digest, load_manifest, load_table, read_priors
from .mht import Reshape
from .pipeline import Method, SelectionReport, run_method
from .risk import SelectionProblem
from .simulate import load_scenario, run_trials, sweep_corruption, sweep_csv, sweep_depth

EXIT_CONFIG = 2
EXIT_DATA = 3
DEFAULT_SEED = 0


def _depth(text: str):
    if text == "max":
        return "max"
    try:
        value = int(text)
    except ValueError:
        raise BadConfig(f"--depth must be a positive integer or 'max', got {text!r}") from None
    if value < 1:
        raise BadConfig(f"--depth must be positive, got {value}")
    return value


def _floats(text: str, flag: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise BadConfig(f"{flag} expects comma-separated numbers, got {text!r}") from None


def _write(path: str | None, text: str) -> None:
    if path:
        Path(path).write_text(text)


def graph_outputs(report: SelectionReport) -> tuple[str, str]:
    """DOT and JSON renderings of a report's reliability graph."""
    if report.graph is None:
        raise DataError(f"report from method {report.method!r} has no graph section")
    graph = ReliabilityGraph.from_dict(report.graph)
    pvalues = {int(k): v for k, v in report.pvalues.items()}
    return export_graph(graph, effective_counts(graph, exact=True), pvalues)


def cmd_select(args) -> int:
    manifest = load_manifest(args.manifest)
    table = load_table(manifest)
    problem = SelectionProblem(manifest.alphas, args.delta, args.split, args.seed)
    method = Method.parse(args.method)
    weights = _floats(args.weights, "--weights") if args.weights else None

    prior = None
    pseudocount = args.pseudocount if args.pseudocount is not None else manifest.pseudocount
    if manifest.priors is not None:
        prior = read_priors(manifest.priors, table.labels,
                            pseudocount if pseudocount is not None else 0.0)
        if args.flip_priors:
            prior = prior.flipped()
    elif args.flip_priors:
        raise BadConfig("--flip-priors given but the manifest lists no priors file")

    report = run_method(method, table, problem, prior=prior,
                        depth=_depth(args.depth) if args.depth is not None else None,
                        tau=args.tau, reshape=Reshape(args.reshape), k=args.k, weights=weights)
    report.config["inputs"] = {
        "manifest": str(args.manifest),
        "risk_names": list(table.risk_names),
        "sha256": {str(p): file_digest(p) for p in manifest.input_files()},
        "flip_priors": bool(args.flip_priors),
    }

    _write(args.out, report.to_json())
    if args.trace:
        _write(args.trace, json.dumps(report.trace, indent=2, sort_keys=True) + "\n")
    if args.dot or args.graph_json:
        if report.graph is None:
            print(f"note: method {report.method} builds no graph; skipping graph export",
                  file=sys.stderr)
        else:
            dot, doc = graph_outputs(report)
            _write(args.dot, dot)
            _write(args.graph_json, doc)
    if not args.out:
        sys.stdout.write(report.to_json())
    print(f"{report.method}: {len(report.discovered)} discovered; final = "
          f"{report.final_labels[:10]}", file=sys.stderr)
    return 0


def cmd_validate(args) -> int:
    try:
        data = json.loads(Path(args.scenario).read_text())
    except FileNotFoundError:
        raise DataError(f"scenario file {args.scenario} not found") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{args.scenario}: invalid JSON at line {exc.lineno}") from None
    scenario = load_scenario(data)
    if args.delta is not None:
        scenario = replace(scenario, problem=replace(scenario.problem, delta=args.delta))
    if args.seed is not None:
        scenario = replace(scenario, spec=replace(scenario.spec, seed=args.seed))
    options = {"tau": args.tau, "reshape": Reshape(args.reshape)}
    if args.depth is not None:
        options["depth"] = _depth(args.depth)
    if args.k is not None:
        options["k"] = args.k
    if args.sweep_depth and args.corrupt_prior:
        raise BadConfig("--sweep-depth and --corrupt-prior are mutually exclusive")

    if args.sweep_depth:
        depths = [_depth(x.strip()) for x in args.sweep_depth.split(",") if x.strip()]
        options.pop("depth", None)
        reports = sweep_depth(scenario, depths, args.trials, args.jobs, **options)
        key, values = "depth", depths
    elif args.corrupt_prior:
        fractions = _floats(args.corrupt_prior, "--corrupt-prior")
        reports = sweep_corruption(scenario, fractions, args.trials, args.jobs, **options)
        key, values = "corruption", fractions
    else:
        report = run_trials(scenario, args.method, args.trials, args.jobs, **options)
        _write(args.out, report.to_json())
        _write(args.csv, report.to_csv())
        print(f"{report.method}: FDR {report.fdr:.4f} (SE {report.se:.4f}), "
              f"power {report.power:.4f} over {report.trials} trials", file=sys.stderr)
        return 0

    doc = {"sweep": key, "values": values, "reports": [r.to_dict() for r in reports]}
    _write(args.out, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    table = sweep_csv(reports, key, values)
    _write(args.csv, table)
    if not args.csv:
        sys.stdout.write(table)
    return 0


def cmd_export_graph(args) -> int:
    try:
        report = SelectionReport.from_json(Path(args.report).read_text())
    except FileNotFoundError:
        raise DataError(f"report {args.report} not found") from None
    except (json.JSONDecodeError, TypeError) as exc:
        raise DataError(f"{args.report}: not a selection report ({exc})") from None
    dot, doc = graph_outputs(report)
    if not args.dot and not args.json:
        sys.stdout.write(dot)
    _write(args.dot, dot)
    _write(args.json, doc)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rgpt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sel = sub.add_parser("select", help="select hyperparameters from a manifest")
    sel.add_argument("--manifest", required=True)
    sel.add_argument("--method", default=Method.RGPT.value,
                     choices=[m.value for m in Method])
    sel.add_argument("--delta", type=float, default=0.1)
    sel.add_argument("--depth", help="number of graph levels, or 'max'")
    sel.add_argument("--pseudocount", type=float, help="overrides the manifest's pseudocount")
    sel.add_argument("--tau", type=float, default=0.1)
    sel.add_argument("--k", type=int, help="failures allowed by fixed-sequence testing")
    sel.add_argument("--reshape", default=Reshape.BY.value, choices=[r.value for r in Reshape])
    sel.add_argument("--split", type=float, default=0.5, help="fraction of samples for OPT")
    sel.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sel.add_argument("--weights", help="comma-separated auxiliary-risk weights")
    sel.add_argument("--flip-priors", action="store_true",
                     help="priors use 1 = row is more reliable")
    sel.add_argument("--out", help="report JSON (stdout when omitted)")
    sel.add_argument("--trace", help="testing trace JSON")
    sel.add_argument("--dot", help="reliability graph in DOT")
    sel.add_argument("--graph-json", help="reliability graph as JSON")
    sel.set_defaults(func=cmd_select)

    val = sub.add_parser("validate", help="Monte Carlo FDR check on a synthetic scenario")
    val.add_argument("--scenario", required=True)
    val.add_argument("--method", default=Method.RGPT.value, choices=[m.value for m in Method])
    val.add_argument("--trials", type=int, default=1000)
    val.add_argument("--delta", type=float)
    val.add_argument("--seed", type=int, help="overrides the scenario seed")
    val.add_argument("--depth")
    val.add_argument("--tau", type=float, default=0.1)
    val.add_argument("--k", type=int)
    val.add_argument("--reshape", default=Reshape.BY.value, choices=[r.value for r in Reshape])
    val.add_argument("--sweep-depth", help="comma-separated depths (rgpt only)")
    val.add_argument("--corrupt-prior", help="comma-separated corruption fractions (rgpt only)")
    val.add_argument("--jobs", type=int, default=1)
    val.add_argument("--out", help="FDR report JSON")
    val.add_argument("--csv", help="per-trial CSV, or per-point CSV for sweeps")
    val.set_defaults(func=cmd_validate)

    exp = sub.add_parser("export-graph", help="re-emit the graph stored in a report")
    exp.add_argument("--report", required=True)
    exp.add_argument("--dot")
    exp.add_argument("--json")
    exp.set_defaults(func=cmd_export_graph)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
