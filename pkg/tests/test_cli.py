import json
import subprocess
import sys

import numpy as np
import pytest

from hetgraph import __version__, cli
from hetgraph.generators import barbell_graph, complete_graph, cycle_graph, disjoint_union, path_graph
from hetgraph.graphio import (Dataset, Graph, PredictionRecord, Task, parse_tu_dataset, read_table,
                              write_prediction_log, write_table)
from hetgraph.spectral import fiedler_value


def labelled(graphs, labels=None):
    labels = labels or [i % 2 for i in range(len(graphs))]
    return [Graph(i, g.n, g.edges, g.features, lab) for i, (g, lab) in enumerate(zip(graphs, labels))]


@pytest.fixture
def toy(tmp_path):
    graphs = labelled([path_graph(4), cycle_graph(5), complete_graph(4), barbell_graph(3), path_graph(6), cycle_graph(4)])
    d = tmp_path / "data"
    from hetgraph.graphio import write_tu_dataset

    write_tu_dataset(Dataset("toy", graphs, Task("classification", 2)), d, "toy")
    return d


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def body(text):
    lines = text.splitlines()
    assert lines[0].startswith("# hetgraph ")
    return lines[1:]


def test_version(capsys):
    code, out, _ = run(capsys, "--version")
    assert code == 0 and __version__ in out


def test_fiedler_matches_library(capsys, toy):
    code, out, _ = run(capsys, "fiedler", "--dataset", toy)
    assert code == 0
    rows = body(out)
    assert rows[0] == "graph_id,lambda2"
    ds = parse_tu_dataset(toy, "toy")
    for line, g in zip(rows[1:], ds.graphs):
        gid, lam = line.split(",")
        assert int(gid) == g.id and float(lam) == pytest.approx(fiedler_value(g), rel=1e-5)
    assert len(rows) == 1 + len(ds)


def test_provenance_header(capsys, toy):
    code, out, _ = run(capsys, "fiedler", "--dataset", toy, "--laplacian", "normalized")
    head = out.splitlines()[0]
    assert head.startswith(f"# hetgraph {__version__} subcommand=fiedler flags=")
    flags = json.loads(head.split("flags=", 1)[1])
    assert flags["laplacian"] == "normalized" and flags["seed"] == 0
    assert "threads" not in flags and "json" not in flags


def test_outputs_are_byte_identical(capsys, toy, tmp_path):
    for argv in (["features", "--dataset", toy], ["tmd", "--dataset", toy, "--depth", "3"],
                 ["rewire", "selective", "--dataset", toy, "--budget", "2"],
                 ["encode", "--dataset", toy, "--kind", "lape", "--k", "2"]):
        first = run(capsys, *argv, "--threads", "1")[1]
        second = run(capsys, *argv, "--threads", "3")[1]
        assert first == second


def test_unknown_flag_exits_2(capsys, toy):
    code, _, err = run(capsys, "fiedler", "--dataset", toy, "--bogus")
    assert code == 2 and "usage:" in err


def test_missing_required_exits_2(capsys):
    assert run(capsys, "fiedler")[0] == 2
    assert run(capsys, "nosuchcommand")[0] == 2


def test_runtime_error_exits_1(capsys, tmp_path):
    code, _, err = run(capsys, "fiedler", "--dataset", tmp_path / "missing", "--name", "x")
    assert code == 1
    assert json.loads(err.strip().splitlines()[-1])["error"]


def test_mutually_exclusive_weights_exit_2(capsys, toy):
    code, _, err = run(capsys, "tmd", "--dataset", toy, "--epsilon", "1", "--w-const", "2")
    assert code == 2 and "mutually exclusive" in err


def test_json_mode(capsys, toy):
    code, out, _ = run(capsys, "fiedler", "--dataset", toy, "--json")
    obj = json.loads(out)
    assert obj["columns"] == ["graph_id", "lambda2"] and len(obj["rows"]) == 6
    assert obj["provenance"].startswith("hetgraph ")


def test_config_file_and_override(capsys, toy, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"# batch settings\ndataset = {toy}\nlaplacian = normalized\n")
    code, out, _ = run(capsys, "fiedler", "--config", cfg)
    assert code == 0 and '"laplacian": "normalized"' in out.splitlines()[0]
    normalized = body(out)
    code, out, _ = run(capsys, "fiedler", "--config", cfg, "--laplacian", "combinatorial")
    assert code == 0 and body(out) != normalized
    assert body(out) == body(run(capsys, "fiedler", "--dataset", toy)[1])
    cfg.write_text("nonsense = 1\n")
    assert run(capsys, "fiedler", "--config", cfg, "--dataset", toy)[0] == 2


def test_depth_prints_seven(capsys, tmp_path):
    # median Fiedler value is that of P8, 2(1 - cos(pi/8)) ~ 0.152, whose inverse rounds to 7
    from hetgraph.graphio import write_tu_dataset

    graphs = labelled([path_graph(4), path_graph(8), path_graph(12)])
    write_tu_dataset(Dataset("seven", graphs, Task("classification", 2)), tmp_path, "seven")
    code, out, _ = run(capsys, "depth", "--from-dataset", tmp_path)
    assert code == 0
    lines = dict(line.split("=") for line in out.splitlines())
    assert lines["depth"] == "7"
    assert float(lines["lambda_star"]) == pytest.approx(2 * (1 - np.cos(np.pi / 8)), rel=1e-5)


def test_rewire_outputs(capsys, toy, tmp_path):
    out_dir, report = tmp_path / "rw", tmp_path / "rep.jsonl"
    code, out, _ = run(capsys, "rewire", "fosr", "--dataset", toy, "--k", "2", "--out-dir", out_dir,
                       "--report", report)
    assert code == 0
    before = parse_tu_dataset(toy, "toy")
    after = parse_tu_dataset(out_dir, "toy")
    assert len(after) == len(before)
    lines = report.read_text().splitlines()
    assert lines[0].startswith("# hetgraph ")
    reps = [json.loads(s) for s in lines[1:]]
    for g0, g1, rep in zip(before.graphs, after.graphs, reps):
        assert g1.edges == g0.edges | {tuple(e) for e in rep["edges_added"]}
        assert g0.label == g1.label
    assert (out_dir / "toy_provenance.txt").read_text().startswith("# hetgraph ")


def test_rewire_selective_leaves_top_half(capsys, toy):
    code, out, _ = run(capsys, "rewire", "selective", "--dataset", toy, "--budget", "3")
    assert code == 0
    header, rows = read_table_text(out)
    lam = [float(r[header.index("lambda2_before")]) for r in rows]
    thr = float(np.median(lam))
    for r, l0 in zip(rows, lam):
        if l0 >= thr:
            assert r[header.index("rewired")] == "false"


def read_table_text(text):
    lines = [s for s in text.splitlines() if not s.startswith("#")]
    return lines[0].split(","), [s.split(",") for s in lines[1:]]


def test_rewire_needs_budget(capsys, toy):
    assert run(capsys, "rewire", "selective", "--dataset", toy)[0] == 2


def test_borf_passes_disconnected_graphs(capsys, tmp_path, caplog):
    from hetgraph.graphio import write_tu_dataset

    graphs = labelled([cycle_graph(6), disjoint_union(path_graph(3), path_graph(3))])
    write_tu_dataset(Dataset("mix", graphs, Task("classification", 2)), tmp_path, "mix")
    report = tmp_path / "r.jsonl"
    code, out, _ = run(capsys, "rewire", "borf", "--dataset", tmp_path, "--report", report)
    assert code == 0
    reps = [json.loads(s) for s in report.read_text().splitlines()[1:]]
    assert reps[1]["rewired"] is False and reps[1]["skipped"][0]["reason"] == "disconnected"


def test_spectral_dist(capsys, toy):
    code, out, _ = run(capsys, "spectral-dist", "--dataset", toy, "--budget", "2")
    header, rows = read_table_text(out)
    assert code == 0 and [r[0] for r in rows] == ["none", "fosr", "selective-fosr"]
    assert header[0] == "variant" and "median" in header


def test_tmd_then_cdr(capsys, toy, tmp_path):
    dist = tmp_path / "d.csv"
    code, _, _ = run(capsys, "tmd", "--dataset", toy, "--depth", "2", "--out", dist)
    assert code == 0
    header, rows = read_table(dist)
    assert header[:3] == ["graph_id", "label", "d0"]
    m = np.array([[float(x) for x in r[2:]] for r in rows])
    assert np.allclose(m, m.T) and np.all(np.diag(m) == 0)
    code, out, _ = run(capsys, "cdr", "--dist", dist)
    assert code == 0 and read_table_text(out)[0][:3] == ["graph_id", "label", "ratio"]


def test_features_and_encode(capsys, toy):
    code, out, _ = run(capsys, "features", "--dataset", toy)
    header, rows = read_table_text(out)
    assert code == 0 and header[0] == "graph_id" and len(rows) == 6
    for kind, width in (("lape", 2), ("rwpe", 2), ("ldp", None), ("lcp", None)):
        code, out, _ = run(capsys, "encode", "--dataset", toy, "--kind", kind, "--k", "2")
        header, rows = read_table_text(out)
        assert code == 0 and len(rows) == sum(g.n for g in parse_tu_dataset(toy, "toy").graphs)
        if width:
            assert len(header) == 2 + width


def test_consensus(capsys, toy, tmp_path):
    x0 = tmp_path / "x0.txt"
    x0.write_text("1\n0\n0\n0\n")
    summary = tmp_path / "s.csv"
    code, out, _ = run(capsys, "consensus", "--dataset", toy, "--graph", "0", "--x0", x0, "--t-end", "5",
                       "--dt", "0.5", "--summary", summary)
    assert code == 0
    header, rows = read_table_text(out)
    states = np.array([[float(v) for v in r[1:]] for r in rows])
    np.testing.assert_allclose(states.mean(axis=1), 0.25, atol=1e-6)
    assert "decay_rate" in summary.read_text()
    x0.write_text("1\n2\n")
    assert run(capsys, "consensus", "--dataset", toy, "--x0", x0, "--t-end", "1", "--dt", "0.1")[0] == 1


def test_verify_bound(capsys):
    code, out, _ = run(capsys, "verify-bound", "--n-pairs", "10", "--seed", "3")
    header, rows = read_table_text(out)
    assert code == 0 and len(rows) == 10 and all(r[-1] == "true" for r in rows)


def staged_log(path, graphs=6, runs=4):
    recs = [PredictionRecord(g, r, None, float((g + r) % 3 != 0)) for g in range(graphs) for r in range(runs)]
    write_prediction_log(recs, path)
    return recs


def test_analysis_pipeline(capsys, toy, tmp_path):
    log = tmp_path / "runs.jsonl"
    staged_log(log)
    prof = tmp_path / "profile.csv"
    assert run(capsys, "profile", "--log", log, "--metric", "acc", "--out", prof)[0] == 0
    header, rows = read_table(prof)
    assert header == ["graph_id", "count", "mean", "variance"] and len(rows) == 6
    feats = tmp_path / "features.csv"
    assert run(capsys, "features", "--dataset", toy, "--out", feats)[0] == 0
    code, out, _ = run(capsys, "lasso", "--features", feats, "--target", prof, "--lambda", "0.1")
    assert code == 0 and read_table_text(out)[1][-1][0] == "(intercept)"
    code, out, _ = run(capsys, "lasso", "--features", feats, "--target", prof, "--folds", "3", "--json")
    assert code == 0 and "lambda" in json.loads(out)
    code, out, _ = run(capsys, "correlate", "--x", prof, "--x-col", "mean", "--y", prof, "--json")
    assert code == 0 and json.loads(out)["r"] == pytest.approx(1.0)


def test_depth_dist_dynamics_encoding(capsys, tmp_path):
    logs = []
    for depth, good in ((2, {0, 1}), (4, {2, 3}), (6, {4})):
        p = tmp_path / f"depth{depth}.jsonl"
        write_prediction_log([PredictionRecord(g, r, None, float(g in good)) for g in range(5) for r in range(2)], p)
        logs.append(p)
    code, out, _ = run(capsys, "depth-dist", "--logs", *logs)
    assert code == 0 and [[int(a), int(b)] for a, b in read_table_text(out)[1]] == [[2, 2], [4, 2], [6, 1]]

    log = tmp_path / "epochs.jsonl"
    write_prediction_log([PredictionRecord(g, 0, e, float(e >= g)) for g in range(4) for e in range(5)], log)
    code, out, _ = run(capsys, "dynamics", "--log", log)
    header, rows = read_table_text(out)
    assert code == 0 and [r[0] for r in rows] == ["0", "1", "2", "3", "4"] and float(rows[-1][2]) == 1.0

    p0, p1 = tmp_path / "p0.csv", tmp_path / "p1.csv"
    write_table([[0, 10, 0.4, 0.1], [1, 10, 0.0, 0.0]], ["graph_id", "count", "mean", "variance"], p0)
    write_table([[0, 10, 0.8, 0.1], [1, 10, 0.0, 0.0]], ["graph_id", "count", "mean", "variance"], p1)
    code, out, _ = run(capsys, "encoding-effect", "--base", p0, "--enc", p1)
    assert code == 0 and [[int(a), float(b)] for a, b in read_table_text(out)[1]] == [[0, 2.0], [1, 1.0]]


def test_console_script():
    res = subprocess.run([sys.executable, "-m", "hetgraph.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and __version__ in res.stdout
