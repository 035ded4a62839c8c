"""Graphviz DOT export of analysis subgraphs."""

from __future__ import annotations

from typing import Iterable

from mixscope.peeling import PeelingChain
from mixscope.taint import TaintReport
from mixscope.txgraph import TransactionGraph
from mixscope.units import sat_to_btc


def _q(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _short(txid: str) -> str:
    return txid[:12]


def _render(name: str, nodes: dict[str, dict[str, str]], edges: Iterable[tuple[str, str, str]]) -> str:
    lines = [f"digraph {name} {{", "  rankdir=LR;", "  node [shape=box, fontname=monospace];"]
    for node, attrs in sorted(nodes.items()):
        attr = ", ".join(f"{k}={_q(v)}" for k, v in sorted(attrs.items()))
        lines.append(f"  {_q(node)} [{attr}];")
    for a, b, label in sorted(set(edges)):
        lines.append(f"  {_q(a)} -> {_q(b)} [label={_q(label)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def taint_to_dot(graph: TransactionGraph, report: TaintReport) -> str:
    """Followed edges of a taint trace; mixer hits are filled blue."""
    hits = {h.txid: h for h in report.hits}
    nodes: dict[str, dict[str, str]] = {}
    edges = []

    def add(txid: str) -> None:
        if txid in nodes:
            return
        attrs = {"label": _short(txid)}
        if txid == report.root:
            attrs.update(style="filled", fillcolor="lightgrey", label=f"root\\n{_short(txid)}")
        if txid in hits:
            h = hits[txid]
            attrs.update(style="filled", fillcolor="blue", fontcolor="white",
                         label=f"{_short(txid)}\\n{sat_to_btc(h.value)} BTC\\ndepth {h.depth}")
        nodes[txid] = attrs

    add(report.root)
    for a, vout, b in report.edges:
        add(a)
        add(b)
        edges.append((a, b, f"{vout}: {sat_to_btc(graph.output(a, vout).value)}"))
    return _render("taint", nodes, edges)


def chain_to_dot(graph: TransactionGraph, chains: Iterable[PeelingChain]) -> str:
    nodes: dict[str, dict[str, str]] = {}
    edges = []
    for chain in chains:
        nodes[chain.start] = {"label": f"start\\n{_short(chain.start)}", "style": "filled", "fillcolor": "palegreen"}
        prev = chain.start
        for n in chain.nodes:
            nodes.setdefault(n.txid, {"label": _short(n.txid)})
            user = f"pay:{n.txid}:{n.user_vout}"
            nodes[user] = {"label": sat_to_btc(graph.output(n.txid, n.user_vout).value), "shape": "ellipse"}
            edges.append((prev, n.txid, "change"))
            edges.append((n.txid, user, "user"))
            prev = n.txid
        if chain.end:
            nodes[chain.end] = {"label": f"collector\\n{_short(chain.end)}", "style": "filled", "fillcolor": "orange"}
            edges.append((prev, chain.end, "change"))
    return _render("peeling", nodes, edges)


def expansion_to_dot(members: Iterable[str], frontier: Iterable[tuple[str, str]] = ()) -> str:
    """Member transactions, with discovery edges (parent, child) when given."""
    nodes = {m: {"label": _short(m)} for m in members}
    return _render("expansion", nodes, ((a, b, "") for a, b in frontier))


__all__ = ["chain_to_dot", "expansion_to_dot", "taint_to_dot"]
