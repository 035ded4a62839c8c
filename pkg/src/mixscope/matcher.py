"""Match timestamped convert records to on-chain transactions.

For each record: find the block whose median timestamp is closest to the
record time, collect transactions from a window of blocks around it, keep
those with an output of (nearly) the record value, rank them, and accept the
first whose receiving address the validator confirms.
"""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable

from mixscope.txgraph import GraphError, IngestError, TransactionGraph, dumps_record, parse_ndjson_records

_RECORD_KEYS = ("curIn", "curOut", "time", "value_sat")


class MatchError(ValueError):
    pass


class ServiceCheck(str, Enum):
    SERVICE = "service"
    NOT_SERVICE = "not-service"
    UNKNOWN = "unknown"


class MatchStatus(str, Enum):
    VALIDATED = "Validated"
    UNVALIDATED = "Unvalidated"
    REJECTED = "Rejected"


Validator = Callable[[str], ServiceCheck]


def unknown_validator(address: str) -> ServiceCheck:
    return ServiceCheck.UNKNOWN


def set_validator(service_addresses: Iterable[str]) -> Validator:
    """Offline stand-in for an address lookup API: known set -> service, else not."""
    known = frozenset(service_addresses)

    def check(address: str) -> ServiceCheck:
        return ServiceCheck.SERVICE if address in known else ServiceCheck.NOT_SERVICE

    return check


@dataclass(frozen=True)
class ConvertRecord:
    cur_in: str
    cur_out: str
    timestamp: int
    value: int

    def __post_init__(self):
        if not self.cur_in or not self.cur_out:
            raise ValueError("currency codes must be non-empty")
        if self.value <= 0:
            raise ValueError("record value must be positive")

    def to_json(self) -> dict:
        return {"curIn": self.cur_in, "curOut": self.cur_out, "time": self.timestamp, "value_sat": self.value}

    @classmethod
    def from_json(cls, obj: dict) -> "ConvertRecord":
        if not isinstance(obj, dict):
            raise ValueError("record must be a JSON object")
        extra = set(obj) - set(_RECORD_KEYS)
        if extra:
            raise ValueError(f"unknown record key(s): {', '.join(sorted(extra))}")
        missing = [k for k in _RECORD_KEYS if k not in obj]
        if missing:
            raise ValueError(f"missing record key(s): {', '.join(missing)}")
        for k in ("time", "value_sat"):
            if isinstance(obj[k], bool) or not isinstance(obj[k], int):
                raise ValueError(f"{k} must be an integer")
        if not isinstance(obj["curIn"], str) or not isinstance(obj["curOut"], str):
            raise ValueError("currency codes must be strings")
        return cls(obj["curIn"], obj["curOut"], obj["time"], obj["value_sat"])


def read_records(stream) -> list[ConvertRecord]:
    out = []
    for lineno, obj in parse_ndjson_records(stream):
        try:
            out.append(ConvertRecord.from_json(obj))
        except ValueError as exc:
            raise IngestError(str(exc), lineno) from None
    return out


def dumps_records(records: Iterable[ConvertRecord]) -> str:
    return "".join(dumps_record(r.to_json()) + "\n" for r in records)


@dataclass(frozen=True)
class MatcherConfig:
    window_blocks: int = 7
    value_tolerance: int = 0
    # (blocks after, blocks before) the closest block; replaces the centered window
    legacy_deltas: tuple[int, int] | None = None

    def __post_init__(self):
        if self.window_blocks < 1 or self.window_blocks % 2 == 0:
            raise ValueError("window_blocks must be an odd integer >= 1")
        if self.value_tolerance < 0:
            raise ValueError("value_tolerance must be >= 0")
        if self.legacy_deltas is not None and min(self.legacy_deltas) < 0:
            raise ValueError("legacy deltas must be non-negative")

    def window(self, center: int) -> tuple[int, int]:
        if self.legacy_deltas is not None:
            after, before = self.legacy_deltas
            return center - before, center + after
        half = self.window_blocks // 2
        return center - half, center + half


@dataclass(frozen=True)
class MatchResult:
    record_index: int
    txid: str | None
    vout: int | None
    candidate_count: int
    status: MatchStatus

    @property
    def matched(self) -> bool:
        return self.txid is not None

    def to_json(self) -> dict:
        return {"record": self.record_index, "txid": self.txid, "vout": self.vout,
                "candidates": self.candidate_count, "status": self.status.value}


class _BlockClock:
    """Nearest-block lookup over the graph's median block timestamps."""

    def __init__(self, graph: TransactionGraph):
        pairs = sorted((t, h) for h, t in graph.block_times.items())
        if not pairs:
            raise MatchError("graph has no block index")
        self.times = [t for t, _ in pairs]
        self.heights = [h for _, h in pairs]

    def closest(self, ts: int) -> int:
        i = bisect.bisect_left(self.times, ts)
        best = None
        for j in (i - 1, i):
            if 0 <= j < len(self.times):
                key = (abs(self.times[j] - ts), self.heights[j])
                if best is None or key < best[0]:
                    best = (key, self.heights[j])
        return best[1]


def _match_one(graph: TransactionGraph, clock: _BlockClock, idx: int, rec: ConvertRecord,
               cfg: MatcherConfig, validator: Validator) -> MatchResult:
    lo, hi = cfg.window(clock.closest(rec.timestamp))
    ranked = []
    for h in range(lo, hi + 1):
        for txid in graph.txids_at_height(h):
            tx = graph.tx(txid)
            best = None
            for vout, out in enumerate(tx.outputs):
                diff = abs(out.value - rec.value)
                if diff <= cfg.value_tolerance and (best is None or diff < best[0]):
                    best = (diff, vout)
            if best is not None:
                ranked.append((best[0], abs(tx.timestamp - rec.timestamp), txid, best[1]))
    ranked.sort()
    if not ranked:
        return MatchResult(idx, None, None, 0, MatchStatus.REJECTED)
    fallback = None
    for _, _, txid, vout in ranked:
        verdict = ServiceCheck(validator(graph.output(txid, vout).address.text))
        if verdict is ServiceCheck.SERVICE:
            return MatchResult(idx, txid, vout, len(ranked), MatchStatus.VALIDATED)
        if verdict is ServiceCheck.UNKNOWN and fallback is None:
            fallback = (txid, vout)
    if fallback is not None:
        return MatchResult(idx, fallback[0], fallback[1], len(ranked), MatchStatus.UNVALIDATED)
    return MatchResult(idx, None, None, len(ranked), MatchStatus.REJECTED)


def match_records(graph: TransactionGraph, records: list[ConvertRecord], cfg: MatcherConfig = MatcherConfig(),
                  validator: Validator = unknown_validator) -> list[MatchResult]:
    if not records:
        raise MatchError("no convert records to match")
    clock = _BlockClock(graph)
    return [_match_one(graph, clock, i, rec, cfg, validator) for i, rec in enumerate(records)]


def reverse_match(graph: TransactionGraph, records: list[ConvertRecord], cfg: MatcherConfig = MatcherConfig(),
                  validator: Validator = unknown_validator, target: str = "BTC") -> list[MatchResult]:
    """Match records converting *into* ``target`` against service payouts.

    Result indices refer to positions in the filtered record list.
    """
    return match_records(graph, [r for r in records if r.cur_out == target], cfg, validator)


def match_rate(results: list[MatchResult]) -> float:
    return sum(r.matched for r in results) / len(results) if results else 0.0


def dumps_results(results: Iterable[MatchResult]) -> str:
    return "".join(json.dumps(r.to_json(), separators=(",", ":")) + "\n" for r in results)


__all__ = ["ConvertRecord", "GraphError", "MatchError", "MatchResult", "MatchStatus", "MatcherConfig",
           "ServiceCheck", "dumps_records", "dumps_results", "match_rate", "match_records", "read_records",
           "reverse_match", "set_validator", "unknown_validator"]
