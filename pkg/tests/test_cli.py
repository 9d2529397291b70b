import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from rgpt.cli import main
from rgpt.errors import BadConfig, DataError
from rgpt.io import load_manifest, load_table, read_priors, read_risk_csv, write_demo_inputs
from rgpt.risk import RiskTable
from rgpt.simulate import gen_synthetic, standard_battery


@pytest.fixture
def demo(tmp_path):
    sc = standard_battery(n_hyperparams=12, n_samples=300)["structured_prior"]
    raw = gen_synthetic(sc.spec, np.random.default_rng(0))
    labels = tuple(f"p{i:02d}" for i in range(raw.n_hyperparams))
    table = RiskTable(raw.values, labels, ("error", "length"))
    return write_demo_inputs(tmp_path / "demo", table, sc.problem.alphas, sc.prior)


def run(*argv):
    return main([str(a) for a in argv])


# --- file formats ----------------------------------------------------------------------


def test_manifest_round_trip(demo):
    m = load_manifest(demo)
    assert m.alphas == (0.35,)
    t = load_table(m)
    assert t.values.shape == (300, 12, 2)
    assert t.risk_names == ("error", "length")


def test_constrained_risks_moved_first(tmp_path):
    (tmp_path / "a.csv").write_text("x,y\n0,1\n1,1\n")
    (tmp_path / "b.csv").write_text("y,x\n0,0.5\n0,0.25\n")
    (tmp_path / "m.json").write_text(json.dumps({"risks": [
        {"name": "len", "file": "a.csv"},
        {"name": "err", "file": "b.csv", "constrained": True, "alpha": 0.2}]}))
    t = load_table(load_manifest(tmp_path / "m.json"))
    assert t.risk_names == ("err", "len") and t.labels == ("y", "x")
    assert t.values[:, :, 0].tolist() == [[0.0, 0.5], [0.0, 0.25]]


def test_csv_parse_error_names_position(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text("a,b\n0,1\n1,oops\n")
    with pytest.raises(DataError, match=r"line 3, column 2"):
        read_risk_csv(p)


def test_csv_label_mismatch(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text("a,c\n0,1\n")
    with pytest.raises(DataError, match="missing"):
        read_risk_csv(p, ("a", "b"))


def test_priors_triplet_form(tmp_path):
    p = tmp_path / "pr.csv"
    p.write_text("i,j,eta\na,b,0.8\nc,a,0.3\n")
    pr = read_priors(p, ("a", "b", "c"), 10.0)
    assert pr.eta[0, 1] == 0.8 and pr.eta[1, 0] == pytest.approx(0.2)
    assert pr.eta[2, 0] == 0.3 and pr.eta[0, 2] == pytest.approx(0.7)
    assert pr.eta[1, 2] == 0.5


def test_priors_square_form_reordered(tmp_path):
    p = tmp_path / "pr.csv"
    p.write_text(",b,a\nb,0,0.9\na,0.1,0\n")
    pr = read_priors(p, ("a", "b"), 1.0)
    assert pr.eta[1, 0] == 0.9 and pr.eta[0, 1] == pytest.approx(0.1)


@pytest.mark.parametrize("doc,exc", [
    ({"risks": [{"name": "e", "file": "e.csv", "constrained": True}]}, BadConfig),
    ({"risks": [{"name": "e", "file": "e.csv"}]}, BadConfig),
    ({"risks": []}, BadConfig),
])
def test_manifest_config_errors(tmp_path, doc, exc):
    (tmp_path / "m.json").write_text(json.dumps(doc))
    with pytest.raises(exc):
        load_manifest(tmp_path / "m.json")


# --- commands ----------------------------------------------------------------------------


def test_select_rgpt_writes_report_and_dot(demo, tmp_path):
    out, dot, trace = tmp_path / "r.json", tmp_path / "rg.dot", tmp_path / "t.json"
    with pytest.warns(RuntimeWarning, match="clamped"):  # the demo front is smaller than 17
        code = run("select", "--manifest", demo, "--method", "rgpt", "--delta", 0.1, "--depth", 17,
                   "--pseudocount", 1000, "--tau", 0.1, "--seed", 7, "--out", out, "--dot", dot,
                   "--trace", trace)
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["config"]["seed"] == 7 and rep["config"]["pseudocount"] == 1000.0
    assert rep["config"]["depth_requested"] == 17
    assert rep["graph"] is not None
    assert dot.read_text().startswith("digraph")
    assert json.loads(trace.read_text()) == rep["trace"]


def test_select_ltt_has_no_graph(demo, tmp_path):
    out = tmp_path / "l.json"
    assert run("select", "--manifest", demo, "--method", "ltt-bh", "--out", out) == 0
    assert json.loads(out.read_text())["graph"] is None
    assert run("export-graph", "--report", out, "--dot", tmp_path / "x.dot") == 3


def test_missing_alpha_exit_2(demo, tmp_path):
    doc = json.loads(demo.read_text())
    del doc["risks"][0]["alpha"]
    bad = demo.parent / "bad.json"
    bad.write_text(json.dumps(doc))
    assert run("select", "--manifest", bad) == 2


def test_bad_data_exit_3(demo):
    (demo.parent / "error.csv").write_text("p00\n2.5\n")
    assert run("select", "--manifest", demo) == 3


def test_flip_priors_changes_graph(demo, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run("select", "--manifest", demo, "--depth", 3, "--out", a)
    run("select", "--manifest", demo, "--depth", 3, "--flip-priors", "--out", b)
    ra, rb = json.loads(a.read_text()), json.loads(b.read_text())
    assert rb["config"]["inputs"]["flip_priors"] is True
    assert ra["graph"] != rb["graph"]


def test_export_graph_reproduces_select_dot(demo, tmp_path):
    out, dot = tmp_path / "r.json", tmp_path / "rg.dot"
    run("select", "--manifest", demo, "--out", out, "--dot", dot, "--graph-json", tmp_path / "g.json")
    assert run("export-graph", "--report", out, "--dot", tmp_path / "e.dot",
               "--json", tmp_path / "e.json") == 0
    assert (tmp_path / "e.dot").read_bytes() == dot.read_bytes()
    assert (tmp_path / "e.json").read_bytes() == (tmp_path / "g.json").read_bytes()


def test_validate_single_and_sweeps(tmp_path):
    sc = tmp_path / "s.json"
    sc.write_text(json.dumps({"battery": "structured_prior", "n_hyperparams": 8, "n_samples": 200}))
    assert run("validate", "--scenario", sc, "--trials", 6, "--out", tmp_path / "v.json",
               "--csv", tmp_path / "v.csv") == 0
    assert "fdr" in json.loads((tmp_path / "v.json").read_text())
    assert run("validate", "--scenario", sc, "--trials", 4, "--sweep-depth", "1,3,max",
               "--csv", tmp_path / "d.csv") == 0
    assert (tmp_path / "d.csv").read_text().splitlines()[0].startswith("depth,")
    assert len((tmp_path / "d.csv").read_text().splitlines()) == 4
    assert run("validate", "--scenario", sc, "--trials", 4, "--corrupt-prior", "0,0.5,1",
               "--csv", tmp_path / "f.csv") == 0
    assert (tmp_path / "f.csv").read_text().splitlines()[1].startswith("0.0,")


def test_validate_errors(tmp_path):
    sc = tmp_path / "s.json"
    sc.write_text(json.dumps({"battery": "mixed"}))
    assert run("validate", "--scenario", sc, "--trials", 2, "--corrupt-prior", "0.5") == 2
    assert run("validate", "--scenario", tmp_path / "missing.json") == 3
    assert run("validate", "--scenario", sc, "--trials", 0) == 2


def test_module_entry_point(demo):
    proc = subprocess.run([sys.executable, "-m", "rgpt", "select", "--manifest", str(demo),
                           "--method", "pt-fst"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["method"] == "pt-fst"
