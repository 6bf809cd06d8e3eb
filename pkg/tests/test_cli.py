from __future__ import annotations

import json
import subprocess
import sys

import pytest

from aqcgap.cli import build_config, build_parser, main
from aqcgap.graph import load_graph


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def small_graph(tmp_path):
    path = tmp_path / "ck8.json"
    assert run("ck-gen", "-r", 2, "-g", 2, "--wa", 1, "--wb", 1.5, "-o", path) == 0
    return path


def test_ck_gen(tmp_path):
    path = tmp_path / "ck15.json"
    assert run("ck-gen", "-r", 3, "-g", 3, "--wa", 1, "--wb", 1.8, "-o", path) == 0
    graph, part = load_graph(path)
    assert graph.n == 15 and len(graph.edges) == 45
    assert part.members("A") == list(range(6))


def test_ck_gen_small(small_graph):
    graph, _ = load_graph(small_graph)
    assert graph.n == 8 and len(graph.edges) == 10


def test_rational_weights(tmp_path):
    path = tmp_path / "g.json"
    assert run("ck-gen", "--wb", "9/5", "-o", path) == 0
    assert load_graph(path)[0].weights[-1] == pytest.approx(1.8)


def test_gap_outputs_and_determinism(small_graph, tmp_path, capsys):
    out = tmp_path / "a"
    snapshots = []
    for _ in range(2):
        assert run("gap", "--graph", small_graph, "--k", 1, "--grid", 17, "--jobs", 1, "--out", out) == 0
        snapshots.append([(out / name).read_bytes() for name in ("gap_k1.csv", "gap_k1.json")])
    assert "s*=" in capsys.readouterr().out
    assert snapshots[0] == snapshots[1]
    side = json.loads((out / "gap_k1.json").read_text())
    assert 0 < side["s_star"] < 1 and side["g_min"] > 0
    assert side["config"]["grid"] == 17


def test_desev_output(small_graph, tmp_path):
    out = tmp_path / "d"
    assert run("desev", "--graph", small_graph, "--state", "first-excited", "--top", 3, "--desev-grid", 5,
               "--jobs", 1, "--out", out) == 0
    rows = (out / "desev_first-excited_k1.csv").read_text().splitlines()
    assert len(rows) == 6 and rows[0].count(",") == 3


def test_art_output(small_graph, tmp_path):
    out = tmp_path / "art"
    assert run("art", "--graph", small_graph, "--k", 2, "--grid", 17, "--jobs", 1, "--out", out) == 0
    header = (out / "art_k2.csv").read_text().splitlines()[0]
    assert header == "k,s_star,g_min,M_sstar,max_M,max_normH,ART2,ART1"
    assert (out / "art_k2_ratio.csv").exists()


def test_table1_small(tmp_path):
    out = tmp_path / "t1"
    assert run("table1", "-r", 2, "-g", 2, "--wb-list", "1.2,1.5", "--grid", 17, "--jobs", 1, "--out", out) == 0
    lines = (out / "table1.csv").read_text().splitlines()
    assert lines[0] == "w_B,s_star,g_min" and len(lines) == 3
    assert lines[1].startswith("1.2,")


def test_input_errors(tmp_path, capsys):
    assert run("gap", "--graph", tmp_path / "missing.json") == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["exit_code"] == 2 and err["error"] == "InputError"
    assert run("gap", "--k", "0.5") == 2
    assert run("gap", "--tol", "-1") == 2
    assert run("desev", "--zoom", "0.7", "0.6", "-r", 2, "-g", 2) == 2


def test_degenerate_gap_exit_code(tmp_path):
    graph = tmp_path / "tie.json"
    graph.write_text(json.dumps({"n": 2, "vertices": [{"id": 0, "weight": 1}, {"id": 1, "weight": 1}],
                                 "edges": [{"u": 0, "v": 1}], "default_J": 1.5}))
    assert run("gap", "--graph", graph, "--grid", 9, "--jobs", 1, "--out", tmp_path) == 3


def test_config_precedence(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("k: 3\ntol: 1e-8\nw_B: 1.5\n")
    args = build_parser().parse_args(["gap", "--config", str(cfg), "--k", "5"])
    conf = build_config(args)
    assert conf.k == 5 and conf.tol == 1e-8 and conf.w_B == 1.5 and conf.s_tol == 1e-9
    cfg.write_text("bogus: 1\n")
    assert run("gap", "--config", cfg) == 2


def test_verify_command(tmp_path, capsys):
    assert run("verify", "--out", tmp_path, "--jobs", 1) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 7
    assert all(item["passed"] for item in json.loads((tmp_path / "verify.json").read_text()))


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "aqcgap", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("aqcgap")
