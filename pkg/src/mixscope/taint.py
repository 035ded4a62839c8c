"""Forward taint tracing into a known mixing set, and fee/profit estimates."""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable

from mixscope.txgraph import GraphError, TransactionGraph


@dataclass(frozen=True)
class TaintConfig:
    max_depth: int = 50
    min_output: int = 90_000_000

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_output < 0:
            raise ValueError("min_output must be >= 0")


@dataclass(frozen=True)
class TaintHit:
    txid: str
    value: int
    depth: int


@dataclass
class TaintReport:
    root: str
    hits: list[TaintHit]
    total_value: int
    explored: int
    # followed edges (from_txid, vout, to_txid); kept for DOT export
    edges: list[tuple[str, int, str]] = field(default_factory=list)

    @property
    def hit_txids(self) -> set[str]:
        return {h.txid for h in self.hits}

    def to_json(self) -> dict:
        return {
            "root": self.root,
            "hits": [{"txid": h.txid, "value_sat": h.value, "depth": h.depth} for h in self.hits],
            "total_value_sat": self.total_value,
            "explored": self.explored,
            "edges": [[a, v, b] for a, v, b in self.edges],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TaintReport":
        return cls(
            root=obj["root"],
            hits=[TaintHit(h["txid"], h["value_sat"], h["depth"]) for h in obj["hits"]],
            total_value=obj["total_value_sat"],
            explored=obj["explored"],
            edges=[(a, v, b) for a, v, b in obj.get("edges", [])],
        )


def trace_taint(graph: TransactionGraph, root: str, mixing_set: Iterable[str],
                cfg: TaintConfig = TaintConfig()) -> TaintReport:
    """Breadth-first forward walk from ``root`` that stops at the mixer boundary.

    An output is followed only if it carries at least ``min_output`` and its
    transaction sits above ``max_depth``.  Spenders in ``mixing_set`` are hits:
    they accumulate every qualifying tainted output they consume and are not
    expanded further.  Each transaction is visited once, at its minimal depth.
    """
    graph.tx(root)
    mixers = set(mixing_set)
    depth: dict[str, int] = {root: 0}
    hit_value: Counter[str] = Counter()
    edges: list[tuple[str, int, str]] = []
    queue = deque([root])
    while queue:
        txid = queue.popleft()
        d = depth[txid]
        if d >= cfg.max_depth:
            continue
        tx = graph.tx(txid)
        for vout, spender in enumerate(graph.spenders(txid)):
            if spender is None or tx.outputs[vout].value < cfg.min_output:
                continue
            edges.append((txid, vout, spender))
            if spender in mixers:
                hit_value[spender] += tx.outputs[vout].value
                depth.setdefault(spender, d + 1)
                continue
            if spender not in depth:
                depth[spender] = d + 1
                queue.append(spender)
    hits = sorted((TaintHit(t, v, depth[t]) for t, v in hit_value.items()),
                  key=lambda h: (h.depth, graph.tx(h.txid).sort_key))
    return TaintReport(root, hits, sum(h.value for h in hits), len(depth), edges)


@dataclass
class ProfitReport:
    buckets: dict[str, int]
    total: int
    monthly_average: float

    def to_json(self) -> dict:
        return {"buckets": dict(self.buckets), "total_sat": self.total,
                "monthly_average_sat": round(self.monthly_average, 3)}

    @classmethod
    def from_buckets(cls, raw: dict[str, int]) -> "ProfitReport":
        if not raw:
            return cls({}, 0, 0.0)
        months = _month_span(min(raw), max(raw))
        buckets = {m: raw.get(m, 0) for m in months}
        total = sum(buckets.values())
        return cls(buckets, total, total / len(buckets))


def month_of(timestamp: int) -> str:
    return datetime.fromtimestamp(timestamp, tz=timezone.utc).strftime("%Y-%m")


def _month_span(first: str, last: str) -> list[str]:
    y, m = map(int, first.split("-"))
    ly, lm = map(int, last.split("-"))
    out = []
    while (y, m) <= (ly, lm):
        out.append(f"{y:04d}-{m:02d}")
        y, m = (y + 1, 1) if m == 12 else (y, m + 1)
    return out


def deposit_outpoints(graph: TransactionGraph, mixer_txs: set[str]) -> list[tuple[str, int]]:
    """Outputs from outside the mixing set that mixing transactions consume."""
    out = []
    for txid in sorted(mixer_txs, key=lambda t: graph.tx(t).sort_key):
        for inp in graph.tx(txid).inputs:
            if inp.prev_txid not in mixer_txs:
                out.append(inp.outpoint)
    return out


def estimate_pwyw_fees(graph: TransactionGraph, mixer_txs: Iterable[str], chip_unit: int = 100_000) -> ProfitReport:
    """Pay-what-you-want fee estimate: the sub-chip remainder of every deposit."""
    mixers = set(mixer_txs)
    if not mixers:
        raise ValueError("mixer transaction set is empty")
    if chip_unit <= 0:
        raise ValueError("chip_unit must be positive")
    raw: Counter[str] = Counter()
    for txid, vout in deposit_outpoints(graph, mixers):
        v = graph.output(txid, vout).value
        raw[month_of(graph.tx(txid).timestamp)] += v % chip_unit
    return ProfitReport.from_buckets(dict(raw))


def estimate_address_fees(graph: TransactionGraph, fee_addresses: Iterable[str],
                          tx_set: Iterable[str]) -> ProfitReport:
    fee_addrs = {str(a) for a in fee_addresses}
    raw: Counter[str] = Counter()
    for txid in tx_set:
        tx = graph.tx(txid)
        paid = sum(o.value for o in tx.outputs if o.address.text in fee_addrs)
        if paid:
            raw[month_of(tx.timestamp)] += paid
    return ProfitReport.from_buckets(dict(raw))


def common_output_addresses(graph: TransactionGraph, tx_set: Iterable[str],
                            min_occurrence_fraction: float) -> list[tuple[str, int]]:
    """Output addresses that recur in at least the given fraction of ``tx_set``."""
    txids = set(tx_set)
    if not txids:
        raise ValueError("tx_set is empty")
    counts: Counter[str] = Counter()
    for txid in txids:
        counts.update({o.address.text for o in graph.tx(txid).outputs})
    need = min_occurrence_fraction * len(txids)
    return sorted(((a, c) for a, c in counts.items() if c >= need), key=lambda ac: (-ac[1], ac[0]))


__all__ = ["GraphError", "ProfitReport", "TaintConfig", "TaintHit", "TaintReport",
           "common_output_addresses", "deposit_outpoints", "estimate_address_fees",
           "estimate_pwyw_fees", "month_of", "trace_taint"]
