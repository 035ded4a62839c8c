import json
import subprocess
import sys
from pathlib import Path

import pytest

from mixscope.cli import build_parser, main
from mixscope.expansion import seed_expand
from mixscope.taint import TaintConfig, trace_taint
from mixscope.txgraph import load_graph


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["simulate", "--seed", "42", "--chip-mixes", "40", "--peeling-chains", "6", "--coinjoin-rounds",
                 "4", "--background-txs", "40", "--out", str(d / "sim")]) == 0
    return d


def _truth(sim_dir):
    return json.loads((sim_dir / "sim" / "groundtruth.json").read_text())


def test_simulate_outputs(sim_dir):
    names = sorted(p.name for p in (sim_dir / "sim").iterdir())
    assert names == ["groundtruth.json", "manifest.json", "records.ndjson", "simconfig.json", "txs.ndjson"]
    manifest = json.loads((sim_dir / "sim" / "manifest.json").read_text())
    assert manifest["subcommand"] == "simulate"
    assert all(v.startswith("sha256:") for v in manifest["outputs"].values())
    assert not list((sim_dir / "sim").glob(".*"))  # no temp files left behind


def test_expand_one_seed_equals_all(sim_dir, capsys):
    truth = _truth(sim_dir)
    graph = str(sim_dir / "sim" / "txs.ndjson")
    seeds = truth["samples"]["chipmix"]
    assert main(["expand", "--graph", graph, "--seeds", seeds[0]]) == 0
    one = json.loads(capsys.readouterr().out)
    (sim_dir / "seeds.json").write_text(json.dumps(seeds))
    assert main(["expand", "--graph", graph, "--seeds", f"@{sim_dir / 'seeds.json'}"]) == 0
    allseeds = json.loads(capsys.readouterr().out)
    assert one["members"] == allseeds["members"]
    # thin adapter: same as the library
    assert set(one["members"]) == seed_expand(load_graph(graph), seeds[:1]).members


def test_trace_and_dot(sim_dir):
    truth = _truth(sim_dir)
    graph = str(sim_dir / "sim" / "txs.ndjson")
    members = sim_dir / "members.json"
    assert main(["expand", "--graph", graph, "--seeds", *truth["samples"]["chipmix"], "--out", str(members)]) == 0
    root = truth["deposits"][0]["txid"]
    report = sim_dir / "report.json"
    assert main(["trace", "--graph", graph, "--root", root, "--mixing", str(members), "--max-depth", "50",
                 "--min-output", "0.001", "--out", str(report)]) == 0
    rep = json.loads(report.read_text())
    lib = trace_taint(load_graph(graph), root, json.loads(members.read_text())["members"], TaintConfig(min_output=100_000))
    assert rep["root"] == root and rep["hits"]
    assert rep == json.loads(json.dumps(lib.to_json()))
    dot = sim_dir / "taint.dot"
    assert main(["export-dot", "--graph", graph, "--taint", str(report), "--out", str(dot)]) == 0
    text = dot.read_text()
    assert text.startswith("digraph taint {") and 'fillcolor="blue"' in text
    assert (sim_dir / "taint.dot.manifest.json").exists()


def test_library_parity_for_trace(sim_dir, capsys):
    truth = _truth(sim_dir)
    graph = str(sim_dir / "sim" / "txs.ndjson")
    (sim_dir / "mix.json").write_text(json.dumps(sorted(k for k, v in truth["labels"].items() if v == "ChipMix")))
    root = truth["deposits"][1]["txid"]
    assert main(["trace", "--graph", graph, "--root", root, "--mixing", str(sim_dir / "mix.json"),
                 "--min-output", "0.0001"]) == 0
    got = json.loads(capsys.readouterr().out)
    want = trace_taint(load_graph(graph), root, set(json.loads((sim_dir / "mix.json").read_text())),
                       TaintConfig(min_output=10_000))
    assert got == json.loads(json.dumps(want.to_json()))


def test_chains_classify_profit_match(sim_dir, capsys):
    truth = _truth(sim_dir)
    graph = str(sim_dir / "sim" / "txs.ndjson")
    peel = sim_dir / "peel.json"
    peel.write_text(json.dumps(truth["samples"]["peel"]))
    assert main(["chains", "--graph", graph, "--txids", f"@{peel}", "--figure", str(sim_dir / "c.png")]) == 0
    chains = json.loads(capsys.readouterr().out)
    assert {c["start"] for c in chains["chains"]} == {c["start"] for c in truth["chains"]}
    assert (sim_dir / "c.png").read_bytes()[:4] == b"\x89PNG"

    assert main(["classify", "--graph", graph, "--samples", f"@{peel}"]) == 0
    assert json.loads(capsys.readouterr().out)["verdict"] == "Swapping"

    mixes = sim_dir / "mixes.json"
    mixes.write_text(json.dumps({"members": sorted(k for k, v in truth["labels"].items() if v == "ChipMix")}))
    assert main(["profit", "--graph", graph, "--mixing", str(mixes), "--chip-unit", "0.001",
                 "--figure", str(sim_dir / "p.svg")]) == 0
    profit = json.loads(capsys.readouterr().out)
    assert profit["total_sat"] == sum(v for k, v in truth["fees"].items() if truth["labels"][k] == "Deposit")
    assert (sim_dir / "p.svg").exists()

    cj = sim_dir / "cj.json"
    cj.write_text(json.dumps(sorted(k for k, v in truth["labels"].items() if v == "CoinJoin")))
    assert main(["profit", "--graph", graph, "--mixing", str(cj), "--method", "address"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert set(out["fee_addresses"]) >= set(truth["fee_addresses"])

    svc = sim_dir / "svc.json"
    svc.write_text(json.dumps(truth["service_addresses"]))
    assert main(["match", "--graph", graph, "--records", str(sim_dir / "sim" / "records.ndjson"),
                 "--service-addresses", str(svc)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == len(truth["deposits"])
    assert all(json.loads(x)["status"] == "Validated" for x in lines)
    assert main(["match", "--graph", graph, "--records", str(sim_dir / "sim" / "records.ndjson"), "--reverse",
                 "--legacy-deltas", "1", "0"]) == 0
    assert len(capsys.readouterr().out.splitlines()) == len(truth["payouts"])


def test_ingest_check_and_detect_sets(sim_dir, capsys):
    graph = str(sim_dir / "sim" / "txs.ndjson")
    assert main(["ingest-check", "--graph", graph]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["transactions"] == len(_truth(sim_dir)["labels"])
    assert main(["detect-sets", "--graph", graph, "--min-set-size", "3"]) == 0
    assert json.loads(capsys.readouterr().out)["count"] > 0


def test_exit_codes(sim_dir, tmp_path, caplog):
    graph = str(sim_dir / "sim" / "txs.ndjson")
    assert main([]) == 1
    assert main(["frobnicate"]) == 1
    assert main(["trace", "--graph", graph, "--bogus"]) == 1
    assert main(["trace", "--graph", graph, "--root", "x", "--mixing", "m.json", "--min-output", "0.123456789"]) == 1
    assert main(["ingest-check", "--graph", str(tmp_path / "missing.ndjson")]) == 2
    bad = tmp_path / "bad.ndjson"
    bad.write_text('{"txid": 1}\n')
    assert main(["ingest-check", "--graph", str(bad)]) == 2
    assert "line 1" in caplog.text
    truth = _truth(sim_dir)
    background = next(k for k, v in truth["labels"].items() if v == "Background")
    assert main(["expand", "--graph", graph, "--seeds", background]) == 3
    assert main(["trace", "--graph", graph, "--root", "0" * 64, "--mixing", str(bad)]) == 2
    (tmp_path / "m.json").write_text("[]")
    assert main(["profit", "--graph", graph, "--mixing", str(tmp_path / "m.json")]) == 2
    assert main(["simulate", "--out", str(tmp_path / "s"), "--seed", "-3"]) == 1


def test_help_shows_defaults(capsys):
    parser = build_parser()
    sub = parser._subparsers._group_actions[0].choices
    help_text = "".join(sub[name].format_help() for name in ("trace", "match", "profit", "expand", "chains"))
    for needle in ("default: 50", "default: 0.9", "default: 7", "default: 0.001", "default: 2", "default: 5"):
        assert needle in help_text, needle
    assert set(sub) == {"ingest-check", "simulate", "detect-sets", "classify", "expand", "chains", "trace",
                        "profit", "match", "export-dot"}


def test_module_entry_point_and_log_env(sim_dir):
    env = {"MIXSCOPE_LOG": "info", "PATH": "/usr/bin:/bin"}
    proc = subprocess.run([sys.executable, "-m", "mixscope", "ingest-check", "--graph",
                           str(sim_dir / "sim" / "txs.ndjson")], capture_output=True, text=True, env=env)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["transactions"] > 0
    assert "manifest:" in proc.stderr
