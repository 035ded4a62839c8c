import hashlib

from builders import BTC, GraphBuilder
from mixscope.dot import chain_to_dot, expansion_to_dot, taint_to_dot
from mixscope.peeling import extend_chain
from mixscope.plotting import plot_chain_lengths, plot_profit, plot_taint_depths
from mixscope.taint import ProfitReport, trace_taint
from test_peeling import fig8b


def small_taint():
    b = GraphBuilder()
    b.coinbase("root", [("1a", 2 * BTC)])
    b.add("hop", [("root", 0)], [("1b", BTC), ("1c", BTC - 10)], height=1)
    b.add("mix", [("hop", 0)], [('1"q', BTC)], height=2)
    g = b.graph()
    return g, trace_taint(g, b["root"], {b["mix"]}), b


def test_taint_dot_marks_hits():
    g, rep, b = small_taint()
    text = taint_to_dot(g, rep)
    assert text.startswith("digraph taint {") and text.endswith("}\n")
    hit_line = next(x for x in text.splitlines() if x.strip().startswith(f'"{b["mix"]}"'))
    assert 'fillcolor="blue"' in hit_line and "depth 2" in hit_line
    assert f'"{b["root"]}" -> "{b["hop"]}"' in text
    assert taint_to_dot(g, rep) == text


def test_chain_and_expansion_dot():
    b = fig8b()
    g = b.graph()
    text = chain_to_dot(g, [extend_chain(g, b["deposit"])])
    assert "collector" in text and "2.00000000" in text
    assert text.count("->") == 5
    exp = expansion_to_dot([b["tx1"], b["tx2"]], [(b["tx1"], b["tx2"])])
    assert exp.count("->") == 1


def test_figures_are_written_and_stable(tmp_path):
    g, rep, b = small_taint()
    plot_taint_depths(rep, tmp_path / "t1.png")
    plot_taint_depths(rep, tmp_path / "t2.png")
    digest = [hashlib.sha256((tmp_path / n).read_bytes()).hexdigest() for n in ("t1.png", "t2.png")]
    assert digest[0] == digest[1]
    plot_profit(ProfitReport.from_buckets({"2019-01": 5 * BTC, "2019-04": BTC}), tmp_path / "p.pdf")
    assert (tmp_path / "p.pdf").read_bytes()[:4] == b"%PDF"
    for name in ("a.svg", "b.svg", "a.pdf", "b.pdf"):
        plot_taint_depths(rep, tmp_path / name)
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()
    assert (tmp_path / "a.pdf").read_bytes() == (tmp_path / "b.pdf").read_bytes()
    fb = fig8b()
    plot_chain_lengths([extend_chain(fb.graph(), fb["deposit"])], tmp_path / "c.png")
    assert (tmp_path / "c.png").stat().st_size > 1000
