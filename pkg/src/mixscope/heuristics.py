"""Anonymity sets, the change-output heuristic and mechanism classification."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

from mixscope.addresses import AddressKind, classify_address_type
from mixscope.txgraph import GraphError, Transaction, TransactionGraph

__all__ = [
    "AddressKind",
    "AnonymitySet",
    "HeuristicsConfig",
    "Mechanism",
    "MechanismVerdict",
    "change_output_candidate",
    "classify_address_type",
    "classify_mechanism",
    "context_of",
    "detect_anonymity_sets",
    "generates_anonymity_sets",
]


@dataclass(frozen=True)
class HeuristicsConfig:
    min_set_size: int = 2
    min_set_count: int = 1
    chain_majority_fraction: float = 0.6
    denomination_whitelist: frozenset[int] | None = None

    def __post_init__(self):
        if self.min_set_size < 2:
            raise ValueError("min_set_size must be >= 2")
        if self.min_set_count < 1:
            raise ValueError("min_set_count must be >= 1")
        if not 0 < self.chain_majority_fraction <= 1:
            raise ValueError("chain_majority_fraction must be in (0, 1]")
        if self.denomination_whitelist is not None:
            object.__setattr__(self, "denomination_whitelist", frozenset(self.denomination_whitelist))


@dataclass(frozen=True)
class AnonymitySet:
    txid: str
    value: int
    member_vouts: tuple[int, ...]

    @property
    def size(self) -> int:
        return len(self.member_vouts)

    def to_json(self) -> dict:
        return {"txid": self.txid, "value_sat": self.value, "size": self.size,
                "member_vouts": list(self.member_vouts)}


def detect_anonymity_sets(tx: Transaction, cfg: HeuristicsConfig = HeuristicsConfig()) -> list[AnonymitySet]:
    """Group equal-valued outputs; one set per qualifying value, ascending."""
    vouts_by_value: dict[int, list[int]] = {}
    for i, out in enumerate(tx.outputs):
        vouts_by_value.setdefault(out.value, []).append(i)
    wl = cfg.denomination_whitelist
    return [
        AnonymitySet(tx.txid, value, tuple(vouts))
        for value, vouts in sorted(vouts_by_value.items())
        if len(vouts) >= cfg.min_set_size and (wl is None or value in wl)
    ]


def generates_anonymity_sets(tx: Transaction, cfg: HeuristicsConfig = HeuristicsConfig()) -> bool:
    return len(detect_anonymity_sets(tx, cfg)) >= cfg.min_set_count


def _majority_kind(kinds: list[AddressKind]) -> AddressKind | None:
    if not kinds:
        return None
    ranked = Counter(kinds).most_common()
    if len(ranked) > 1 and ranked[0][1] == ranked[1][1]:
        return None
    return ranked[0][0]


def change_output_candidate(tx: Transaction, graph: TransactionGraph) -> int | None:
    """Guess the change output of a two-output transaction.

    First the address-type split: if the outputs differ in kind and exactly
    one of them matches the dominant input kind, it is the change.  Failing
    that, if exactly one output address had never been seen at a lower block
    height, that fresh address is the change.  Otherwise abstain.
    """
    if len(tx.outputs) != 2:
        raise GraphError(f"{tx.txid}: change heuristic needs exactly 2 outputs, got {len(tx.outputs)}")
    kinds = [o.address.kind for o in tx.outputs]
    if kinds[0] != kinds[1] and tx.inputs:
        majority = _majority_kind([a.kind for a in graph.input_addresses(tx)])
        matching = [i for i, k in enumerate(kinds) if k == majority]
        if len(matching) == 1:
            return matching[0]
    fresh = []
    for i, out in enumerate(tx.outputs):
        seen = graph.first_seen_height(out.address.text)
        if seen is None or seen >= tx.block_height:
            fresh.append(i)
    if len(fresh) == 1:
        return fresh[0]
    return None


class Mechanism(str, Enum):
    SWAPPING = "Swapping"
    OBFUSCATING = "Obfuscating"
    UNKNOWN = "Unknown"


@dataclass
class MechanismVerdict:
    verdict: Mechanism
    evidence: list[tuple[str, str]] = field(default_factory=list)
    chain_fraction: float = 0.0

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "chain_fraction": round(self.chain_fraction, 6),
            "evidence": [{"txid": t, "reason": r} for t, r in self.evidence],
        }


def context_of(graph: TransactionGraph, txid: str) -> list[str]:
    """Spenders of each output plus sources of each input, in first-seen order."""
    tx = graph.tx(txid)
    ctx: dict[str, None] = {}
    for sp in graph.spenders(txid):
        if sp is not None:
            ctx[sp] = None
    for inp in tx.inputs:
        ctx[inp.prev_txid] = None
    return list(ctx)


def _links_into_chain(tx: Transaction, graph: TransactionGraph) -> bool:
    if len(tx.outputs) != 2:
        return False
    change = change_output_candidate(tx, graph)
    if change is not None:
        nxt = graph.spender_of(tx.txid, change)
        if nxt is not None and len(graph.tx(nxt).outputs) == 2:
            return True
    for inp in tx.inputs:
        parent = graph.tx(inp.prev_txid)
        if len(parent.outputs) == 2 and change_output_candidate(parent, graph) == inp.prev_vout:
            return True
    return False


def classify_mechanism(sample_txids: Iterable[str], graph: TransactionGraph,
                       cfg: HeuristicsConfig = HeuristicsConfig()) -> MechanismVerdict:
    samples = list(dict.fromkeys(sample_txids))
    if not samples:
        raise ValueError("classify_mechanism needs at least one sample transaction")
    for t in samples:
        graph.tx(t)

    context: dict[str, None] = {}
    for t in samples:
        for c in context_of(graph, t):
            context[c] = None

    witnesses = [(t, "anonymity-set") for t in list(samples) + list(context)
                 if generates_anonymity_sets(graph.tx(t), cfg)]
    if witnesses:
        # dedupe while keeping order
        witnesses = list(dict.fromkeys(witnesses))
        return MechanismVerdict(Mechanism.OBFUSCATING, witnesses)

    links = [c for c in context if _links_into_chain(graph.tx(c), graph)]
    fraction = len(links) / len(context) if context else 0.0
    if links and fraction >= cfg.chain_majority_fraction:
        return MechanismVerdict(Mechanism.SWAPPING, [(c, "chain-link") for c in links], fraction)
    return MechanismVerdict(Mechanism.UNKNOWN, [], fraction)
