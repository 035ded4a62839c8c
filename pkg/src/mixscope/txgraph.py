"""UTXO data model, NDJSON ingestion and the immutable indexed transaction graph.

One transaction per line::

    {"txid": "<64-hex>", "block": 812, "time": 1577836800,
     "inputs": [{"txid": "<64-hex>", "vout": 0}],
     "outputs": [{"addr": "1Ff...", "value_sat": 700000000}]}

Ingestion is two-pass (load every record, then link inputs), so lines may
appear in any order.
"""

from __future__ import annotations

import json
import logging
import re
import statistics
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Iterator

from mixscope.addresses import Address

logger = logging.getLogger(__name__)

Outpoint = tuple[str, int]

_TXID_RE = re.compile(r"^[0-9a-f]{64}$")
_TX_KEYS = ("txid", "block", "time", "inputs", "outputs")
_INPUT_KEYS = ("txid", "vout")
_OUTPUT_KEYS = ("addr", "value_sat")


class GraphError(ValueError):
    """Structural problem with transaction data or an unknown lookup."""


class IngestError(GraphError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def is_txid(value: object) -> bool:
    return isinstance(value, str) and bool(_TXID_RE.match(value))


@dataclass(frozen=True, slots=True)
class TxInput:
    prev_txid: str
    prev_vout: int

    @property
    def outpoint(self) -> Outpoint:
        return (self.prev_txid, self.prev_vout)


@dataclass(frozen=True, slots=True)
class TxOutput:
    address: Address
    value: int


@dataclass(frozen=True, slots=True)
class Transaction:
    txid: str
    block_height: int
    timestamp: int
    inputs: tuple[TxInput, ...]
    outputs: tuple[TxOutput, ...]

    def __post_init__(self):
        if not is_txid(self.txid):
            raise GraphError(f"txid must be 64 lowercase hex chars: {self.txid!r}")
        if self.block_height < 0 or self.timestamp < 0:
            raise GraphError(f"{self.txid}: negative block height or timestamp")
        if not self.outputs:
            raise GraphError(f"{self.txid}: transaction has no outputs")
        for out in self.outputs:
            if out.value <= 0:
                raise GraphError(f"{self.txid}: output value must be positive")
        for inp in self.inputs:
            if not is_txid(inp.prev_txid) or inp.prev_vout < 0:
                raise GraphError(f"{self.txid}: malformed input reference")

    @property
    def is_coinbase(self) -> bool:
        return not self.inputs

    @property
    def output_total(self) -> int:
        return sum(o.value for o in self.outputs)

    @property
    def sort_key(self) -> tuple[int, str]:
        return (self.block_height, self.txid)

    def to_record(self) -> dict:
        return {
            "txid": self.txid,
            "block": self.block_height,
            "time": self.timestamp,
            "inputs": [{"txid": i.prev_txid, "vout": i.prev_vout} for i in self.inputs],
            "outputs": [{"addr": o.address.text, "value_sat": o.value} for o in self.outputs],
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Transaction":
        _check_keys(rec, _TX_KEYS, "transaction")
        inputs = []
        for item in _expect(rec["inputs"], list, "inputs"):
            _check_keys(item, _INPUT_KEYS, "input")
            inputs.append(TxInput(_expect(item["txid"], str, "input txid"),
                                  _expect_int(item["vout"], "vout")))
        outputs = []
        for item in _expect(rec["outputs"], list, "outputs"):
            _check_keys(item, _OUTPUT_KEYS, "output")
            addr = _expect(item["addr"], str, "addr")
            if not addr:
                raise GraphError("empty output address")
            outputs.append(TxOutput(Address.of(addr), _expect_int(item["value_sat"], "value_sat")))
        return cls(
            txid=_expect(rec["txid"], str, "txid"),
            block_height=_expect_int(rec["block"], "block"),
            timestamp=_expect_int(rec["time"], "time"),
            inputs=tuple(inputs),
            outputs=tuple(outputs),
        )


def _check_keys(obj: object, keys: tuple[str, ...], what: str) -> None:
    if not isinstance(obj, dict):
        raise GraphError(f"{what} must be a JSON object")
    extra = set(obj) - set(keys)
    if extra:
        raise GraphError(f"unknown {what} key(s): {', '.join(sorted(extra))}")
    missing = [k for k in keys if k not in obj]
    if missing:
        raise GraphError(f"missing {what} key(s): {', '.join(missing)}")


def _expect(value, typ, what):
    if not isinstance(value, typ):
        raise GraphError(f"{what} has wrong type ({type(value).__name__})")
    return value


def _expect_int(value, what) -> int:
    # bool is an int subclass in Python; JSON true/false are not amounts
    if isinstance(value, bool) or not isinstance(value, int):
        raise GraphError(f"{what} must be an integer")
    if value < 0:
        raise GraphError(f"{what} must be non-negative")
    return value


class TransactionGraph:
    """Immutable transaction store with spender, address and block indexes.

    Build it with :meth:`build` (or :func:`ingest_ndjson`); the constructor
    checks duplicates, dangling references, double spends and negative fees.
    """

    def __init__(self, transactions: Iterable[Transaction]):
        by_id: dict[str, Transaction] = {}
        for tx in transactions:
            if tx.txid in by_id:
                raise GraphError(f"duplicate txid {tx.txid}")
            by_id[tx.txid] = tx
        ordered = sorted(by_id.values(), key=lambda t: t.sort_key)
        self._txs: dict[str, Transaction] = {t.txid: t for t in ordered}

        spender: dict[Outpoint, str] = {}
        dangling: list[str] = []
        double: list[str] = []
        for tx in ordered:
            for inp in tx.inputs:
                prev = self._txs.get(inp.prev_txid)
                if prev is None or inp.prev_vout >= len(prev.outputs):
                    dangling.append(f"{tx.txid} -> {inp.prev_txid}:{inp.prev_vout}")
                    continue
                if inp.outpoint in spender:
                    double.append(f"{inp.prev_txid}:{inp.prev_vout} spent by "
                                  f"{spender[inp.outpoint]} and {tx.txid}")
                    continue
                spender[inp.outpoint] = tx.txid
        if dangling:
            raise GraphError(f"{len(dangling)} dangling input reference(s): " + "; ".join(dangling))
        if double:
            raise GraphError("double-spent outpoint(s): " + "; ".join(double))
        self._spender = spender

        addr_index: dict[str, set[str]] = defaultdict(set)
        first_seen: dict[str, int] = {}
        block_index: dict[int, list[str]] = defaultdict(list)
        block_times: dict[int, list[int]] = defaultdict(list)
        for tx in ordered:
            if tx.inputs:
                fee = self._input_total(tx) - tx.output_total
                if fee < 0:
                    raise GraphError(f"{tx.txid}: outputs exceed inputs by {-fee} sat")
            for out in tx.outputs:
                addr_index[out.address.text].add(tx.txid)
                h = first_seen.get(out.address.text)
                if h is None or tx.block_height < h:
                    first_seen[out.address.text] = tx.block_height
            for inp in tx.inputs:
                addr_index[self.output(*inp.outpoint).address.text].add(tx.txid)
            block_index[tx.block_height].append(tx.txid)
            block_times[tx.block_height].append(tx.timestamp)

        self._addr_index = {a: tuple(sorted(ids, key=lambda i: self._txs[i].sort_key))
                            for a, ids in sorted(addr_index.items())}
        self._first_seen = first_seen
        self._block_index = {h: tuple(ids) for h, ids in sorted(block_index.items())}
        self._median_time = {h: int(statistics.median_low(ts)) for h, ts in sorted(block_times.items())}

    @classmethod
    def build(cls, transactions: Iterable[Transaction]) -> "TransactionGraph":
        return cls(transactions)

    # basic container protocol

    def __len__(self) -> int:
        return len(self._txs)

    def __contains__(self, txid: object) -> bool:
        return txid in self._txs

    def __iter__(self) -> Iterator[Transaction]:
        """Transactions in (block_height, txid) order."""
        return iter(self._txs.values())

    def txids(self) -> list[str]:
        return list(self._txs)

    def tx(self, txid: str) -> Transaction:
        try:
            return self._txs[txid]
        except KeyError:
            raise GraphError(f"unknown txid {txid}") from None

    def output(self, txid: str, vout: int) -> TxOutput:
        tx = self.tx(txid)
        if not 0 <= vout < len(tx.outputs):
            raise GraphError(f"unknown outpoint {txid}:{vout}")
        return tx.outputs[vout]

    def spender_of(self, txid: str, vout: int) -> str | None:
        self.output(txid, vout)
        return self._spender.get((txid, vout))

    def spenders(self, txid: str) -> list[str | None]:
        """Spending txid per output of ``txid`` (None for unspent)."""
        tx = self.tx(txid)
        return [self._spender.get((txid, i)) for i in range(len(tx.outputs))]

    def input_values(self, tx: Transaction) -> list[int]:
        return [self.output(*inp.outpoint).value for inp in tx.inputs]

    def input_addresses(self, tx: Transaction) -> list[Address]:
        return [self.output(*inp.outpoint).address for inp in tx.inputs]

    def _input_total(self, tx: Transaction) -> int:
        return sum(self._txs[i.prev_txid].outputs[i.prev_vout].value for i in tx.inputs)

    # address and block indexes

    def txids_for_address(self, address: str) -> tuple[str, ...]:
        return self._addr_index.get(address, ())

    def first_seen_height(self, address: str) -> int | None:
        """Lowest block height at which ``address`` received an output."""
        return self._first_seen.get(address)

    @property
    def heights(self) -> list[int]:
        return list(self._block_index)

    def txids_at_height(self, height: int) -> tuple[str, ...]:
        return self._block_index.get(height, ())

    def median_time(self, height: int) -> int:
        try:
            return self._median_time[height]
        except KeyError:
            raise GraphError(f"no block at height {height}") from None

    @property
    def block_times(self) -> dict[int, int]:
        return dict(self._median_time)


def fee_of(tx: Transaction, graph: TransactionGraph) -> int:
    if not tx.inputs:
        raise GraphError(f"{tx.txid}: fee undefined for a transaction without inputs")
    return sum(graph.input_values(tx)) - tx.output_total


def spender_of(graph: TransactionGraph, txid: str, vout: int) -> str | None:
    return graph.spender_of(txid, vout)


def _iter_lines(stream) -> Iterator[str]:
    if isinstance(stream, (str, bytes)):
        stream = stream.splitlines()
    for raw in stream:
        yield raw.decode("utf-8") if isinstance(raw, bytes) else raw


def parse_ndjson_records(stream) -> Iterator[tuple[int, dict]]:
    """Yield (line number, decoded object) for each non-blank line."""
    for lineno, line in enumerate(_iter_lines(stream), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise IngestError(f"malformed JSON ({exc.msg})", lineno) from None
        yield lineno, obj


def ingest_ndjson(stream: IO | Iterable | str | bytes) -> TransactionGraph:
    """Load transactions from an NDJSON byte/text stream into a graph."""
    txs: list[Transaction] = []
    seen: dict[str, int] = {}
    for lineno, obj in parse_ndjson_records(stream):
        try:
            tx = Transaction.from_record(obj)
        except GraphError as exc:
            raise IngestError(str(exc), lineno) from None
        if tx.txid in seen:
            raise IngestError(f"duplicate txid {tx.txid} (first on line {seen[tx.txid]})", lineno)
        seen[tx.txid] = lineno
        txs.append(tx)
    graph = TransactionGraph(txs)
    logger.debug("ingested %d transactions", len(graph))
    return graph


def load_graph(path: str | Path) -> TransactionGraph:
    with open(path, "rb") as fh:
        return ingest_ndjson(fh)


def dumps_record(rec: dict) -> str:
    return json.dumps(rec, separators=(",", ":"), ensure_ascii=False)


def export_ndjson(graph: TransactionGraph | Iterable[Transaction]) -> str:
    """Serialize transactions in (block, txid) order, keys in schema order."""
    txs = sorted(graph, key=lambda t: t.sort_key)
    return "".join(dumps_record(tx.to_record()) + "\n" for tx in txs)
