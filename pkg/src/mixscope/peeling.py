"""Peeling-chain recovery: starting point, chain nodes and ending point.

A chain node has one input and two outputs: one pays a user, the other is
change that funds the next node.  The chain starts at the transaction that
paid the service's deposit address and ends when the trailing change is
swept into a many-input collector.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

from mixscope.heuristics import change_output_candidate
from mixscope.txgraph import GraphError, Transaction, TransactionGraph


class UnboundedChainError(RuntimeError):
    pass


@dataclass(frozen=True)
class PeelingConfig:
    many_inputs_threshold: int = 5
    max_chain_length: int = 10_000
    dust_floor: int = 10_000

    def __post_init__(self):
        if self.many_inputs_threshold < 2:
            raise ValueError("many_inputs_threshold must be >= 2")
        if self.max_chain_length < 1:
            raise ValueError("max_chain_length must be >= 1")
        if self.dust_floor < 0:
            raise ValueError("dust_floor must be >= 0")


@dataclass(frozen=True)
class ChainNode:
    txid: str
    user_vout: int
    change_vout: int | None


@dataclass(frozen=True)
class PeelingChain:
    start: str
    nodes: tuple[ChainNode, ...]
    end: str | None
    reason: str = "unspent"
    trailing_dust: bool = False

    @property
    def txids(self) -> list[str]:
        return [n.txid for n in self.nodes]

    def to_json(self) -> dict:
        return {
            "start": self.start,
            "nodes": [[n.txid, n.user_vout, n.change_vout] for n in self.nodes],
            "end": self.end,
            "reason": self.reason,
            "trailing_dust": self.trailing_dust,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PeelingChain":
        return cls(
            start=obj["start"],
            nodes=tuple(ChainNode(t, u, c) for t, u, c in obj["nodes"]),
            end=obj.get("end"),
            reason=obj.get("reason", "unspent"),
            trailing_dust=obj.get("trailing_dust", False),
        )


def is_chain_shaped(tx: Transaction) -> bool:
    return len(tx.inputs) == 1 and len(tx.outputs) == 2


def _is_collector(tx: Transaction, cfg: PeelingConfig) -> bool:
    return len(tx.inputs) >= cfg.many_inputs_threshold


def find_starting_point(graph: TransactionGraph, txid_in_chain: str,
                        cfg: PeelingConfig = PeelingConfig()) -> str:
    """Walk backwards from a chain node to the transaction that started it.

    While the current transaction is a 1-input/2-output node whose input is the
    change output of a 1-input/2-output parent, step to the parent.  Change is
    picked the same way as when walking forward: the change heuristic first,
    then the unique output whose spender continues the chain, unless the
    consumed output differs in address type from the funding input, which
    marks it as a payment.  A parent with several inputs or a payment edge is
    the starting point; a parent without exactly two outputs means the current
    transaction is.  A transaction with several inputs is its own starting point.
    """
    cur = graph.tx(txid_in_chain)
    for _ in range(cfg.max_chain_length + 1):
        if not is_chain_shaped(cur):
            return cur.txid
        inp = cur.inputs[0]
        parent = graph.tx(inp.prev_txid)
        if len(parent.outputs) != 2:
            return cur.txid  # funded by something that is not a chain link
        if not is_chain_shaped(parent) or not _consumed_is_change(graph, parent, inp.prev_vout, cfg):
            return parent.txid
        cur = parent
    raise UnboundedChainError(f"unbounded chain: no starting point within {cfg.max_chain_length} steps "
                              f"of {txid_in_chain}")


def _continues(graph: TransactionGraph, spender: str | None, cfg: PeelingConfig) -> bool:
    if spender is None:
        return False
    tx = graph.tx(spender)
    return is_chain_shaped(tx) or _is_collector(tx, cfg)


def _node_change(graph: TransactionGraph, tx: Transaction, cfg: PeelingConfig) -> int | None:
    change = change_output_candidate(tx, graph)
    if change is not None:
        return change
    spenders = graph.spenders(tx.txid)
    likely = [i for i, sp in enumerate(spenders) if _continues(graph, sp, cfg)]
    if len(likely) == 1:
        return likely[0]
    return None


def _consumed_is_change(graph: TransactionGraph, parent: Transaction, vout: int, cfg: PeelingConfig) -> bool:
    change = change_output_candidate(parent, graph)
    if change is not None:
        return change == vout
    kinds = [o.address.kind for o in parent.outputs]
    input_kinds = {a.kind for a in graph.input_addresses(parent)}
    if kinds[0] != kinds[1] and kinds[vout] not in input_kinds:
        # type split with the consumed output unlike the funding address: a payment
        return False
    return _node_change(graph, parent, cfg) == vout


def _entry_vout(graph: TransactionGraph, start: Transaction) -> tuple[int | None, str]:
    spenders = graph.spenders(start.txid)
    feeding = [i for i, sp in enumerate(spenders) if sp is not None and is_chain_shaped(graph.tx(sp))]
    if len(feeding) == 1:
        return feeding[0], ""
    if not feeding:
        return None, "no-chain"
    if len(start.outputs) == 2:
        change = change_output_candidate(start, graph)
        if change is not None and (1 - change) in feeding:
            return 1 - change, ""
    return None, "ambiguous-entry"


def extend_chain(graph: TransactionGraph, start: str, cfg: PeelingConfig = PeelingConfig()) -> PeelingChain:
    """Follow the chain forward from its starting point.

    At every node the change output comes from the change heuristic; if that
    abstains, the output whose spender is itself chain-shaped (or a collector)
    is taken.  The walk stops at an unspent change, at a many-input collector
    (recorded as the ending point), at a spender of another shape, or when the
    continuation is ambiguous.  Ambiguity truncates the chain, it never guesses.
    """
    start_tx = graph.tx(start)
    vout, why = _entry_vout(graph, start_tx)
    if vout is None:
        return PeelingChain(start, (), None, why)

    nodes: list[ChainNode] = []
    current = graph.tx(graph.spender_of(start, vout))
    end = None
    reason = "max-length"
    trailing_dust = False
    while len(nodes) < cfg.max_chain_length:
        change = _node_change(graph, current, cfg)
        if change is None:
            reason = "ambiguous"
            break
        nodes.append(ChainNode(current.txid, 1 - change, change))
        trailing_dust = current.outputs[change].value < cfg.dust_floor
        nxt = graph.spender_of(current.txid, change)
        if nxt is None:
            reason = "unspent"
            break
        nxt_tx = graph.tx(nxt)
        if _is_collector(nxt_tx, cfg):
            end, reason = nxt, "collector"
            break
        if not is_chain_shaped(nxt_tx):
            reason = "irregular-spender"
            break
        current = nxt_tx
    return PeelingChain(start, tuple(nodes), end, reason, trailing_dust)


def find_ending_points(graph: TransactionGraph, chains: list[PeelingChain],
                       cfg: PeelingConfig = PeelingConfig()) -> dict[str, str]:
    """Map chain start -> collector transaction, for chains ending in one."""
    out: dict[str, str] = {}
    for chain in chains:
        if not chain.nodes or chain.nodes[-1].change_vout is None:
            continue
        last = chain.nodes[-1]
        sp = graph.spender_of(last.txid, last.change_vout)
        if sp is not None and _is_collector(graph.tx(sp), cfg):
            out[chain.start] = sp
    return out


def group_by_collector(ending_points: dict[str, str]) -> dict[str, list[str]]:
    groups: dict[str, list[str]] = defaultdict(list)
    for start, collector in sorted(ending_points.items()):
        groups[collector].append(start)
    return dict(sorted(groups.items()))


def recover_chain(graph: TransactionGraph, txid_in_chain: str,
                  cfg: PeelingConfig = PeelingConfig()) -> PeelingChain:
    """find_starting_point followed by extend_chain."""
    return extend_chain(graph, find_starting_point(graph, txid_in_chain, cfg), cfg)


__all__ = ["ChainNode", "GraphError", "PeelingChain", "PeelingConfig", "UnboundedChainError",
           "extend_chain", "find_ending_points", "find_starting_point", "group_by_collector",
           "is_chain_shaped", "recover_chain"]
