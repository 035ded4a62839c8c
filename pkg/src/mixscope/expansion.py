"""Seed expansion of obfuscating-mixer transactions.

Starting from known mixing transactions, follow each output to the
transaction that spends it, then look at every other input of that spender:
if the funding transaction also emits anonymity sets it joins the set.
:func:`seed_expand` does this at transaction level; :func:`color_trace` walks
the same structure address by address and keeps the coloring bookkeeping.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

from mixscope.heuristics import HeuristicsConfig, detect_anonymity_sets
from mixscope.txgraph import GraphError, Outpoint, TransactionGraph


class SeedError(ValueError):
    pass


@dataclass(frozen=True)
class FrontierStep:
    txid: str
    via_output: Outpoint
    via_input: Outpoint

    def to_json(self) -> dict:
        return {"txid": self.txid,
                "via_output": [self.via_output[0], self.via_output[1]],
                "via_input": [self.via_input[0], self.via_input[1]]}


@dataclass
class ExpansionResult:
    members: set[str]
    frontier_log: list[FrontierStep] = field(default_factory=list)
    stats: dict[str, int] = field(default_factory=dict)

    def to_json(self, trace: bool = False) -> dict:
        out: dict = {"members": sorted(self.members), "stats": dict(sorted(self.stats.items()))}
        if trace:
            out["frontier_log"] = [s.to_json() for s in self.frontier_log]
        return out


class _SetCache:
    """Memoized anonymity-set test; graph is immutable so this is safe per run."""

    def __init__(self, graph: TransactionGraph, cfg: HeuristicsConfig):
        self.graph = graph
        self.cfg = cfg
        self._memo: dict[str, bool] = {}

    def __call__(self, txid: str) -> bool:
        hit = self._memo.get(txid)
        if hit is None:
            sets = detect_anonymity_sets(self.graph.tx(txid), self.cfg)
            hit = self._memo[txid] = len(sets) >= self.cfg.min_set_count
        return hit


def validate_seeds(graph: TransactionGraph, seeds: Iterable[str], cfg: HeuristicsConfig) -> list[str]:
    seeds = sorted(set(seeds))
    if not seeds:
        raise SeedError("seed set is empty")
    gen = _SetCache(graph, cfg)
    for s in seeds:
        if s not in graph:
            raise SeedError(f"seed {s} is not in the graph")
        if not gen(s):
            raise SeedError(f"seed {s} does not generate anonymity sets")
    return seeds


def seed_expand(graph: TransactionGraph, seeds: Iterable[str],
                cfg: HeuristicsConfig = HeuristicsConfig()) -> ExpansionResult:
    seeds = validate_seeds(graph, seeds, cfg)
    gen = _SetCache(graph, cfg)
    order = lambda t: graph.tx(t).sort_key  # noqa: E731

    members: set[str] = set()
    queued: set[str] = set(seeds)
    log: list[FrontierStep] = []
    stats = {"seeds": len(seeds), "visited": 0, "spenders_checked": 0,
             "unspent_outputs": 0, "rejected": 0, "layers": 0}

    layer = sorted(seeds, key=order)
    while layer:
        stats["layers"] += 1
        nxt: list[str] = []
        for txid in layer:
            members.add(txid)
            stats["visited"] += 1
            for vout, spender in enumerate(graph.spenders(txid)):
                if spender is None:
                    stats["unspent_outputs"] += 1
                    continue
                stats["spenders_checked"] += 1
                for inp in graph.tx(spender).inputs:
                    cand = inp.prev_txid
                    if cand in members or cand in queued:
                        continue
                    if not gen(cand):
                        stats["rejected"] += 1
                        continue
                    queued.add(cand)
                    nxt.append(cand)
                    log.append(FrontierStep(cand, (txid, vout), inp.outpoint))
        layer = sorted(nxt, key=order)
    stats["members"] = len(members)
    return ExpansionResult(members, log, stats)


@dataclass
class ColorTrace:
    colored: set[str]
    transactions: set[str]
    uncolored: set[str]

    def to_json(self) -> dict:
        return {"colored": sorted(self.colored), "transactions": sorted(self.transactions),
                "uncolored": sorted(self.uncolored)}


def color_trace(graph: TransactionGraph, seed_inputs: Iterable[Outpoint],
                cfg: HeuristicsConfig = HeuristicsConfig()) -> ColorTrace:
    """Address-level coloring from seed deposit outpoints.

    Step one colors the anonymity-set members of the mixing transaction that
    consumes each seed input.  Step two looks at every transaction spending an
    output of an identified mixing transaction, tentatively colors its other
    input addresses, and back-walks each of them: if the funding transaction
    emits anonymity sets, its members are colored and the walk continues from
    there; otherwise the tentative color is removed again.
    """
    colored: set[str] = set()
    set_members: set[str] = set()
    removed: set[str] = set()
    identified: set[str] = set()
    pending: deque[str] = deque()

    def identify(txid: str) -> None:
        identified.add(txid)
        tx = graph.tx(txid)
        for aset in detect_anonymity_sets(tx, cfg):
            for v in aset.member_vouts:
                set_members.add(tx.outputs[v].address.text)
                colored.add(tx.outputs[v].address.text)
        pending.append(txid)

    for txid, vout in sorted(set(seed_inputs)):
        spender = graph.spender_of(txid, vout)
        if spender is None or spender in identified:
            continue
        if len(detect_anonymity_sets(graph.tx(spender), cfg)) >= cfg.min_set_count:
            identify(spender)

    while pending:
        mix_txid = pending.popleft()
        for spender in graph.spenders(mix_txid):
            if spender is None:
                continue
            for inp in graph.tx(spender).inputs:
                if inp.prev_txid in identified:
                    continue
                sibling = graph.output(*inp.outpoint).address.text
                colored.add(sibling)
                source = graph.tx(inp.prev_txid)
                if len(detect_anonymity_sets(source, cfg)) >= cfg.min_set_count:
                    identify(source.txid)
                elif sibling not in set_members:
                    colored.discard(sibling)
                    removed.add(sibling)
    return ColorTrace(colored, identified, removed - colored)


def seeds_from_inputs(graph: TransactionGraph, seed_inputs: Iterable[Outpoint],
                      cfg: HeuristicsConfig = HeuristicsConfig()) -> set[str]:
    """Mixing transactions that consume the given deposit outpoints."""
    out = set()
    for txid, vout in seed_inputs:
        sp = graph.spender_of(txid, vout)
        if sp is not None and len(detect_anonymity_sets(graph.tx(sp), cfg)) >= cfg.min_set_count:
            out.add(sp)
    return out


__all__ = ["ColorTrace", "ExpansionResult", "FrontierStep", "GraphError", "SeedError",
           "color_trace", "seed_expand", "seeds_from_inputs", "validate_seeds"]
