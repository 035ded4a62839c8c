import random

import pytest

from builders import BTC, GraphBuilder, random_flow_graph
from mixscope.taint import (ProfitReport, TaintConfig, TaintReport, common_output_addresses, deposit_outpoints,
                            estimate_address_fees, estimate_pwyw_fees, month_of, trace_taint)
from mixscope.txgraph import GraphError
from oracles import dfs_taint


def hack_graph():
    """100 BTC fanned out over three layers into 12 chip-mix deposits."""
    b = GraphBuilder()
    b.coinbase("root", [("1hacker", 100 * BTC)])
    b.add("l1", [("root", 0)], [("1l1a", 33 * BTC), ("1l1b", 33 * BTC), ("1l1c", 34 * BTC)], height=1)
    deposits = []
    for i in range(3):
        v = 33 * BTC if i < 2 else 34 * BTC
        half = v // 2
        b.add(f"l2_{i}", [("l1", i)], [(f"1l2_{i}a", half), (f"1l2_{i}b", v - half)], height=2)
        for j, part in enumerate((half, v - half)):
            q = part // 2
            b.add(f"l3_{i}{j}", [(f"l2_{i}", j)], [(f"3dep{i}{j}a", q), (f"3dep{i}{j}b", part - q)], height=3)
            deposits.append((f"l3_{i}{j}", 0, q))
            deposits.append((f"l3_{i}{j}", 1, part - q))
    mixes = {}
    for k, (name, vout, value) in enumerate(deposits):
        chip = 1_000_000
        n = value // chip
        outs = [(f"1chip{k}_{c}", chip) for c in range(n)]
        if value - n * chip:
            outs.append((f"3chg{k}", value - n * chip))
        mixes[b.add(f"mix{k}", [(name, vout)], outs, height=4)] = value
    return b, mixes


def test_hack_hits_every_mix_with_injected_value():
    b, mixes = hack_graph()
    g = b.graph()
    rep = trace_taint(g, b["root"], set(mixes))
    assert len(mixes) == 12
    assert {h.txid: h.value for h in rep.hits} == mixes
    assert all(h.depth == 4 for h in rep.hits)
    assert rep.total_value == 100 * BTC
    assert rep.explored == 1 + 1 + 3 + 6 + 12
    want, total = dfs_taint(g, b["root"], set(mixes), 50, 90_000_000)
    assert want == mixes and total == rep.total_value


def test_floor_prunes_everything():
    b = GraphBuilder()
    b.coinbase("root", [("1a", 80_000_000), ("1b", 89_999_999)])
    b.add("m", [("root", 0), ("root", 1)], [("1c", 1000)], height=1)
    rep = trace_taint(b.graph(), b["root"], {b["m"]})
    assert rep.hits == [] and rep.explored == 1 and rep.total_value == 0


def test_direct_spender_is_single_hit():
    b = GraphBuilder()
    b.coinbase("root", [("1a", BTC)])
    b.add("m", [("root", 0)], [("1c", BTC)], height=1)
    b.add("after", [("m", 0)], [("1d", BTC)], height=2)
    rep = trace_taint(b.graph(), b["root"], {b["m"], b["after"]})
    assert [(h.txid, h.value, h.depth) for h in rep.hits] == [(b["m"], BTC, 1)]


def test_depth_limit():
    b = GraphBuilder()
    prev = b.coinbase("root", [("1a", BTC)])
    for i in range(5):
        prev = b.add(f"n{i}", [(prev, 0)], [(f"1n{i}", BTC)], height=i + 1)
    b.add("m", [(prev, 0)], [("1m", BTC)], height=9)
    g = b.graph()
    assert trace_taint(g, b["root"], {b["m"]}, TaintConfig(max_depth=6)).hits[0].depth == 6
    assert trace_taint(g, b["root"], {b["m"]}, TaintConfig(max_depth=5)).hits == []


def test_unknown_root():
    with pytest.raises(GraphError):
        trace_taint(GraphBuilder().graph(), "0" * 64, set())


def test_report_json_round_trip():
    b, mixes = hack_graph()
    rep = trace_taint(b.graph(), b["root"], set(mixes))
    again = TaintReport.from_json(rep.to_json())
    assert again == rep
    assert rep.to_json()["total_value_sat"] == sum(h["value_sat"] for h in rep.to_json()["hits"])


def test_monotonicity_on_random_graphs():
    rng = random.Random(9)
    g, mixers, roots = random_flow_graph(rng, 1500)
    for root in roots[:5]:
        base = trace_taint(g, root, mixers, TaintConfig(max_depth=20, min_output=BTC))
        higher_floor = trace_taint(g, root, mixers, TaintConfig(max_depth=20, min_output=5 * BTC))
        deeper = trace_taint(g, root, mixers, TaintConfig(max_depth=40, min_output=BTC))
        assert higher_floor.hit_txids <= base.hit_txids <= deeper.hit_txids


@pytest.mark.parametrize("deposit, fee", [(150_000, 50_000), (50_000, 50_000), (12_800_000, 0)])
def test_pwyw_examples(deposit, fee):
    b = GraphBuilder()
    b.coinbase("u", [("1u", deposit + 10_000)])
    b.add("dep", [("u", 0)], [("3svc", deposit)], height=1)
    b.coinbase("carry", [("3carry", 400_000)])
    b.add("mix", [("dep", 0), ("carry", 0)], [(f"1c{i}", 100_000) for i in range(4)], height=2)
    g = b.graph()
    rep = estimate_pwyw_fees(g, {b["mix"], b["carry"]}, chip_unit=100_000)
    assert rep.total == fee
    assert deposit_outpoints(g, {b["mix"], b["carry"]}) == [(b["dep"], 0)]


def test_pwyw_empty_set_and_bad_unit():
    with pytest.raises(ValueError):
        estimate_pwyw_fees(GraphBuilder().graph(), set())
    b = GraphBuilder()
    b.coinbase("x", [("1x", 1)])
    with pytest.raises(ValueError):
        estimate_pwyw_fees(b.graph(), {b["x"]}, chip_unit=0)


def test_pwyw_matches_sim_ledger(chip_sim):
    g, truth = chip_sim
    rep = estimate_pwyw_fees(g, truth.with_label("ChipMix"))
    assert rep.total == sum(truth.fees_for("Deposit").values())


def wasabi_rounds(n=100, fee=300_000):
    b = GraphBuilder(start_time=1_567_296_000)  # 2019-09-01
    rounds = []
    for i in range(n):
        b.coinbase(f"u{i}", [(f"1u{i}", 30 * BTC)])
        rounds.append(b.add(f"r{i}", [(f"u{i}", 0)], [(f"1a{i}", 10 * BTC), (f"1b{i}", 10 * BTC),
                                                      ("bc1qcoord", fee), (f"1chg{i}", 9 * BTC)], height=i))
    return b, rounds


def test_address_fees_one_month():
    b, rounds = wasabi_rounds()
    rep = estimate_address_fees(b.graph(), {"bc1qcoord"}, rounds)
    assert rep.buckets == {"2019-09": 30_000_000}
    assert rep.total == 30_000_000 and rep.monthly_average == 30_000_000


def test_address_fees_empty_and_silent():
    b, rounds = wasabi_rounds(3)
    assert estimate_address_fees(b.graph(), {"bc1qcoord"}, []).total == 0
    assert estimate_address_fees(b.graph(), {"bc1qnobody"}, rounds).total == 0


def test_address_fees_match_sim(coinjoin_sim):
    g, truth = coinjoin_sim
    rounds = truth.with_label("CoinJoin")
    rep = estimate_address_fees(g, truth.fee_addresses, rounds)
    assert rep.total == sum(truth.fees_for("CoinJoin").values())


def test_common_output_addresses():
    b, rounds = wasabi_rounds(10)
    ranked = common_output_addresses(b.graph(), rounds, 0.5)
    assert ranked[0] == ("bc1qcoord", 10)
    assert common_output_addresses(b.graph(), rounds, 1.0) == [("bc1qcoord", 10)]
    with pytest.raises(ValueError):
        common_output_addresses(b.graph(), [], 0.5)


def test_common_output_addresses_no_universal(coinjoin_sim):
    g, truth = coinjoin_sim
    rounds = truth.with_label("CoinJoin")
    assert common_output_addresses(g, rounds, 1.0) == []
    found = {a for a, _ in common_output_addresses(g, rounds, 0.3)}
    assert set(truth.fee_addresses) <= found


def test_profit_report_pads_months():
    rep = ProfitReport.from_buckets({"2019-11": 10, "2020-02": 20})
    assert list(rep.buckets) == ["2019-11", "2019-12", "2020-01", "2020-02"]
    assert rep.total == 30 and rep.monthly_average == 7.5
    assert ProfitReport.from_buckets({}).total == 0
    assert month_of(1_567_296_000) == "2019-09"
