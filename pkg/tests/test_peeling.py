import pytest

from builders import BTC, GraphBuilder
from mixscope.peeling import (ChainNode, PeelingChain, PeelingConfig, UnboundedChainError, extend_chain,
                              find_ending_points, find_starting_point, group_by_collector, is_chain_shaped,
                              recover_chain)


def fig8b(collector=True):
    """Alice deposits 3 BTC to 3Hp1Fk; the service peels Bob 2 BTC, then Charlie 0.5 BTC."""
    b = GraphBuilder()
    b.coinbase("alice_funds", [("1Alice", 3 * BTC + 40_000_000)])
    b.add("deposit", [("alice_funds", 0)], [("3Hp1Fk", 3 * BTC), ("1AliceChange", 40_000_000)], height=1)
    b.add("tx1", [("deposit", 0)], [("1Bob", 2 * BTC), ("3change1", BTC)], height=2)
    b.add("tx2", [("tx1", 1)], [("1Charlie", BTC // 2), ("3change2", BTC // 2)], height=3)
    if collector:
        for i in range(4):
            b.coinbase(f"other{i}", [(f"3other{i}", 1_000_000 + i)])
        b.add("collector", [("tx2", 1)] + [(f"other{i}", 0) for i in range(4)],
              [("3sweep", BTC // 2 + 4_000_000)], height=4)
    return b


def test_fig8b_start_from_charlie_node():
    b = fig8b()
    assert find_starting_point(b.graph(), b["tx2"]) == b["deposit"]


def test_fig8b_chain():
    b = fig8b()
    chain = extend_chain(b.graph(), b["deposit"])
    assert chain.nodes == (ChainNode(b["tx1"], 0, 1), ChainNode(b["tx2"], 0, 1))
    assert chain.end == b["collector"] and chain.reason == "collector"
    assert recover_chain(b.graph(), b["tx1"]) == chain


def test_unspent_final_change_has_no_end():
    b = fig8b(collector=False)
    g = b.graph()
    chain = extend_chain(g, b["deposit"])
    assert chain.end is None and chain.reason == "unspent" and len(chain.nodes) == 2
    assert find_ending_points(g, [chain]) == {}


def test_multi_input_tx_is_its_own_start():
    b = GraphBuilder()
    b.coinbase("cb", [("1a", BTC), ("1b", BTC), ("1c", BTC)])
    b.add("t", [("cb", 0), ("cb", 1), ("cb", 2)], [("1x", BTC), ("1y", BTC)], height=1)
    assert find_starting_point(b.graph(), b["t"]) == b["t"]


def test_unbounded_chain_error():
    b = GraphBuilder()
    b.coinbase("f", [("1u", 101 * BTC)])
    b.add("dep", [("f", 0)], [("3svc", 100 * BTC), ("1uchg", BTC // 3)], height=1)
    prev, value = ("dep", 0), 100 * BTC
    for i in range(6):
        value -= BTC
        b.add(f"n{i}", [prev], [(f"1pay{i}", BTC), (f"3chg{i}", value)], height=i + 2)
        prev = (f"n{i}", 1)
    g = b.graph()
    assert find_starting_point(g, b["n5"]) == b["dep"]
    with pytest.raises(UnboundedChainError, match="unbounded chain"):
        find_starting_point(g, b["n5"], PeelingConfig(max_chain_length=3))


def test_ambiguous_continuation_truncates():
    b = GraphBuilder()
    b.coinbase("f", [("1u", 10 * BTC)])
    b.add("dep", [("f", 0)], [("1svc", 10 * BTC - 100)], height=1)
    # both outputs fresh, same kind, and both spent by 1-in-2-out transactions
    b.add("n1", [("dep", 0)], [("1p", 6 * BTC), ("1q", 4 * BTC - 200)], height=2)
    b.add("a", [("n1", 0)], [("1r", 5 * BTC), ("1s", BTC - 300)], height=3)
    b.add("c", [("n1", 1)], [("1t", 3 * BTC), ("1v", BTC - 400)], height=3)
    chain = extend_chain(b.graph(), b["dep"])
    assert chain.nodes == () and chain.reason == "ambiguous"


def test_irregular_spender_and_dust():
    b = GraphBuilder()
    b.coinbase("f", [("1u", 10 * BTC)])
    b.add("dep", [("f", 0)], [("3svc", 10 * BTC)], height=1)
    b.add("n1", [("dep", 0)], [("1pay", 10 * BTC - 5_000), ("3chg", 5_000)], height=2)
    b.coinbase("g", [("3z", 1)])
    b.add("odd", [("n1", 1), ("g", 0)], [("3w", 4_000)], height=3)
    chain = extend_chain(b.graph(), b["dep"])
    assert chain.reason == "irregular-spender" and chain.trailing_dust
    assert len(chain.nodes) == 1


def test_no_chain_from_non_chain_start():
    b = GraphBuilder()
    b.coinbase("f", [("1u", 10 * BTC)])
    chain = extend_chain(b.graph(), b["f"])
    assert chain.nodes == () and chain.reason == "no-chain"


def test_chains_sharing_collector(peel_sim):
    g, truth = peel_sim
    chains = [recover_chain(g, c.nodes[0].txid) for c in truth.chains]
    ends = find_ending_points(g, chains)
    groups = group_by_collector(ends)
    assert any(len(starts) >= 2 for starts in groups.values())
    for c in truth.chains:
        if c.end:
            assert ends[c.start] == c.end
            assert len(g.tx(c.end).inputs) >= 5


def test_sim_starts_and_linkage(peel_sim):
    g, truth = peel_sim
    for c in truth.chains:
        for node in c.nodes:
            assert find_starting_point(g, node.txid) == c.start
        assert find_starting_point(g, c.start) == c.start
        got = extend_chain(g, c.start)
        assert got.nodes == c.nodes
        for a, nxt in zip(got.nodes, got.nodes[1:]):
            assert g.spender_of(a.txid, a.change_vout) == nxt.txid
        assert all(is_chain_shaped(g.tx(n.txid)) for n in got.nodes)


def test_chain_json_round_trip():
    b = fig8b()
    chain = extend_chain(b.graph(), b["deposit"])
    assert PeelingChain.from_json(chain.to_json()) == chain


@pytest.mark.parametrize("kwargs", [dict(many_inputs_threshold=1), dict(max_chain_length=0), dict(dust_floor=-1)])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        PeelingConfig(**kwargs)
