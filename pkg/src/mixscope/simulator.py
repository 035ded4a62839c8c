"""Deterministic synthetic mixing-service activity with labeled ground truth.

Three service styles are generated on one shared timeline, plus ordinary
user traffic:

* chip mixes: user deposits (and carried-over service change) are cut into
  equal-valued chips; sub-chip remainders of deposits are the service fee;
* CoinJoin rounds: participants receive equal denomination outputs plus an
  unmixed change output, and each round pays a coordinator fee;
* peeling chains: a deposit funds a run of 1-input/2-output nodes that peel
  off user payouts; trailing changes are swept into many-input collectors.

Everything derives from ``SimConfig.rng_seed``; the same config always yields
byte-identical NDJSON.
"""

from __future__ import annotations

import hashlib
import json
import random
import zlib
from dataclasses import dataclass, field
from typing import Any

from mixscope.addresses import Address
from mixscope.matcher import ConvertRecord, dumps_records
from mixscope.peeling import ChainNode, PeelingChain
from mixscope.txgraph import Transaction, TransactionGraph, TxInput, TxOutput, export_ndjson

LABELS = ("ChipMix", "CoinJoin", "PeelNode", "PeelStart", "PeelEnd", "Deposit", "Payout", "Background")
ALTCOINS = ("ETH", "LTC", "XMR", "ZEC", "DASH")

_B58 = "123456789ABCDEFGHJKLMNPQRSTUVWXYZabcdefghijkmnopqrstuvwxyz"
_BECH32 = "qpzry9x8gf2tvdw0s3jn54khce6mua7l"


class SimConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    rng_seed: int = 0
    chip_mixes: int = 0
    coinjoin_rounds: int = 0
    peeling_chains: int = 0
    background_txs: int = 0

    # chip mixes
    chip_unit: int = 100_000
    chip_max_doubling: int = 7
    min_chips: int = 4
    users_per_mix: tuple[int, int] = (2, 4)
    deposit_range: tuple[int, int] = (500_000, 5_000_000)
    fixed_deposits: tuple[int, ...] | None = None
    change_reuse: bool = True
    isolated_mix_fraction: float = 0.0

    # CoinJoin
    coinjoin_denominations: tuple[int, ...] = (10_000_000, 20_000_000)
    coinjoin_participants: tuple[int, int] = (4, 10)
    coordinator_fee_rate: float = 0.003
    remix_probability: float = 0.4

    # peeling chains
    chain_length: tuple[int, int] = (2, 20)
    chain_deposit_range: tuple[int, int] = (50_000_000, 500_000_000)
    collector_batch: tuple[int, int] = (5, 8)
    address_mode: str = "disjoint"
    fresh_payout_fraction: float = 0.02

    network_fee: int = 1_000
    start_time: int = 1_577_836_800
    mean_block_interval: float = 600.0
    record_jitter: int = 0

    def __post_init__(self):
        for name in ("chip_mixes", "coinjoin_rounds", "peeling_chains", "background_txs",
                     "network_fee", "record_jitter", "chip_max_doubling"):
            if getattr(self, name) < 0:
                raise SimConfigError(f"{name} must be >= 0")
        if not 0 <= self.rng_seed < 2**64:
            raise SimConfigError("rng_seed must be a 64-bit unsigned integer")
        for name in ("users_per_mix", "deposit_range", "coinjoin_participants", "chain_length",
                     "chain_deposit_range", "collector_batch"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise SimConfigError(f"{name}: min {lo} > max {hi}")
            if lo < 1:
                raise SimConfigError(f"{name}: min must be >= 1")
        if self.chip_unit <= 0:
            raise SimConfigError("chip_unit must be positive")
        if self.min_chips < 2:
            raise SimConfigError("min_chips must be >= 2")
        if self.coinjoin_participants[0] < 2:
            raise SimConfigError("a CoinJoin round needs at least 2 participants")
        if self.coinjoin_rounds and not self.coinjoin_denominations:
            raise SimConfigError("CoinJoin rounds need at least one denomination")
        if self.collector_batch[0] < 5:
            raise SimConfigError("collectors need at least 5 inputs")
        if self.address_mode not in ("disjoint", "same"):
            raise SimConfigError("address_mode must be 'disjoint' or 'same'")
        for name in ("isolated_mix_fraction", "remix_probability", "fresh_payout_fraction", "coordinator_fee_rate"):
            if not 0 <= getattr(self, name) <= 1:
                raise SimConfigError(f"{name} must be within [0, 1]")
        if self.mean_block_interval <= 0:
            raise SimConfigError("mean_block_interval must be positive")
        if self.fixed_deposits is not None and (not self.fixed_deposits or min(self.fixed_deposits) <= 0):
            raise SimConfigError("fixed_deposits must be non-empty positive values")
        if self.chain_deposit_range[0] < 1_000_000:
            raise SimConfigError("chain deposits below 0.01 BTC cannot fund a chain")

    def to_json(self) -> dict:
        out = {}
        for k, v in self.__dict__.items():
            out[k] = list(v) if isinstance(v, tuple) else v
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "SimConfig":
        kwargs = {}
        for k, v in obj.items():
            if k not in cls.__dataclass_fields__:
                raise SimConfigError(f"unknown SimConfig field {k!r}")
            kwargs[k] = tuple(v) if isinstance(v, list) else v
        return cls(**kwargs)


@dataclass(frozen=True)
class Flow:
    """One labeled money movement between a user and a service."""
    txid: str
    vout: int
    value: int
    address: str
    time: int

    def to_json(self) -> dict:
        return {"txid": self.txid, "vout": self.vout, "value_sat": self.value,
                "addr": self.address, "time": self.time}


@dataclass(frozen=True)
class RosterEntry:
    record: ConvertRecord
    txid: str
    vout: int

    def to_json(self) -> dict:
        return {"record": self.record.to_json(), "txid": self.txid, "vout": self.vout}


@dataclass
class GroundTruth:
    labels: dict[str, str] = field(default_factory=dict)
    fees: dict[str, int] = field(default_factory=dict)
    chains: list[PeelingChain] = field(default_factory=list)
    records: list[RosterEntry] = field(default_factory=list)
    samples: dict[str, list[str]] = field(default_factory=dict)
    deposits: list[Flow] = field(default_factory=list)
    payouts: list[Flow] = field(default_factory=list)
    service_addresses: list[str] = field(default_factory=list)
    fee_addresses: list[str] = field(default_factory=list)
    isolated_mixes: list[str] = field(default_factory=list)

    def with_label(self, *labels: str) -> set[str]:
        return {t for t, lab in self.labels.items() if lab in labels}

    def fees_for(self, label: str) -> dict[str, int]:
        return {t: f for t, f in self.fees.items() if self.labels.get(t) == label}

    def to_json(self) -> dict:
        return {
            "labels": self.labels,
            "fees": self.fees,
            "chains": [c.to_json() for c in self.chains],
            "records": [r.to_json() for r in self.records],
            "samples": self.samples,
            "deposits": [f.to_json() for f in self.deposits],
            "payouts": [f.to_json() for f in self.payouts],
            "service_addresses": self.service_addresses,
            "fee_addresses": self.fee_addresses,
            "isolated_mixes": self.isolated_mixes,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=False) + "\n"

    @classmethod
    def from_json(cls, obj: dict) -> "GroundTruth":
        def flows(key):
            return [Flow(f["txid"], f["vout"], f["value_sat"], f["addr"], f["time"]) for f in obj.get(key, [])]
        return cls(
            labels=dict(obj["labels"]),
            fees={k: int(v) for k, v in obj.get("fees", {}).items()},
            chains=[PeelingChain.from_json(c) for c in obj.get("chains", [])],
            records=[RosterEntry(ConvertRecord.from_json(r["record"]), r["txid"], r["vout"])
                     for r in obj.get("records", [])],
            samples={k: list(v) for k, v in obj.get("samples", {}).items()},
            deposits=flows("deposits"),
            payouts=flows("payouts"),
            service_addresses=list(obj.get("service_addresses", [])),
            fee_addresses=list(obj.get("fee_addresses", [])),
            isolated_mixes=list(obj.get("isolated_mixes", [])),
        )


def derive_rng(seed: int, tag: str) -> random.Random:
    # crc32 rather than hash(): str hashing is salted per process
    return random.Random((seed << 32) ^ zlib.crc32(tag.encode("utf-8")))


@dataclass
class _ChipMixState:
    txid: str
    carries: list[tuple[str, int]]


class _Sim:
    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.rng = derive_rng(cfg.rng_seed, "structure")
        self.height = 0
        self.times = [cfg.start_time]
        self.txs: list[Transaction] = []
        self.values: dict[tuple[str, int], int] = {}
        self.truth = GroundTruth()
        self._counter = 0
        self._addr_counter = 0
        # (address, height first seen) for reusable user addresses
        self.known_users: list[tuple[str, int]] = []
        # spendable user outputs for background traffic
        self.user_utxos: list[tuple[str, int]] = []
        self.remix_pool: list[tuple[str, int]] = []
        self.service_addrs: set[str] = set()
        self.chip_states: list[_ChipMixState] = []
        self.pending_collect: list[tuple[int, tuple[str, int]]] = []
        self.collect_target = self._collect_target()
        self.chain_parts: list[dict[str, Any]] = []
        self.samples: dict[str, list[str]] = {"chipmix": [], "chip": [], "coinjoin": [], "peel": []}
        self._chip_users: dict[str, list[str]] = {}

    # primitives

    def time_at(self, height: int) -> int:
        while len(self.times) <= height:
            gap = max(1, round(self.rng.expovariate(1.0 / self.cfg.mean_block_interval)))
            self.times.append(self.times[-1] + gap)
        return self.times[height]

    def advance(self, lo: int = 1, hi: int = 1) -> None:
        self.height += self.rng.randint(lo, hi)

    def new_address(self, kind: str) -> str:
        self._addr_counter += 1
        digest = hashlib.sha256(f"{self.cfg.rng_seed}:addr:{self._addr_counter}".encode()).digest()
        n = int.from_bytes(digest, "big")
        if kind == "segwit":
            body = []
            for _ in range(38):
                n, r = divmod(n, 32)
                body.append(_BECH32[r])
            return "bc1q" + "".join(body)
        body = []
        for _ in range(33):
            n, r = divmod(n, 58)
            body.append(_B58[r])
        return ("3" if kind == "p2sh" else "1") + "".join(body)

    def service_address(self) -> str:
        addr = self.new_address("p2sh" if self.cfg.address_mode == "disjoint" else "p2pkh")
        self.service_addrs.add(addr)
        return addr

    def user_address(self) -> str:
        if self.cfg.address_mode == "same":
            return self.new_address("p2pkh")
        return self.new_address(self.rng.choice(("p2pkh", "segwit")))

    def seen_user_address(self) -> str:
        """A user address that already appeared at a strictly lower height."""
        eligible = [a for a, h in self.known_users if h < self.height]
        if not eligible:
            return self.user_address()
        return self.rng.choice(eligible)

    def emit(self, inputs: list[tuple[str, int]], outputs: list[tuple[str, int]], label: str) -> str:
        assert outputs and all(v > 0 for _, v in outputs), outputs
        total_in = sum(self.values.pop(op) for op in inputs)
        assert not inputs or total_in >= sum(v for _, v in outputs), (total_in, outputs)
        self._counter += 1
        h = hashlib.sha256()
        h.update(f"{self.cfg.rng_seed}:{self._counter}:{self.height}".encode())
        h.update(json.dumps([inputs, outputs]).encode())
        txid = h.hexdigest()
        tx = Transaction(
            txid=txid,
            block_height=self.height,
            timestamp=self.time_at(self.height),
            inputs=tuple(TxInput(t, v) for t, v in inputs),
            outputs=tuple(TxOutput(Address.of(a), v) for a, v in outputs),
        )
        self.txs.append(tx)
        for i, (_, v) in enumerate(outputs):
            self.values[(txid, i)] = v
        self.truth.labels[txid] = label
        return txid

    def faucet(self, address: str, value: int) -> tuple[str, int]:
        return (self.emit([], [(address, value)], "Background"), 0)

    def flow(self, txid: str, vout: int) -> Flow:
        tx = self.txs[-1] if self.txs[-1].txid == txid else next(t for t in reversed(self.txs) if t.txid == txid)
        out = tx.outputs[vout]
        return Flow(txid, vout, out.value, out.address.text, tx.timestamp)

    def distinct_split(self, total: int, lo_frac: float, hi_frac: float) -> tuple[int, int]:
        """Split ``total`` into two unequal positive parts."""
        for _ in range(100):
            a = int(total * self.rng.uniform(lo_frac, hi_frac))
            b = total - a
            if a > 0 and b > 0 and a != b:
                return a, b
        raise SimConfigError(f"cannot split {total} sat into two distinct parts")

    # user traffic

    def prefund_users(self, n: int) -> None:
        values = self.rng.sample(range(1_000_000, 200_000_000), n)
        outputs = [(self.user_address(), v) for v in values]
        txid = self.emit([], outputs, "Background")
        for i, (a, _) in enumerate(outputs):
            self.known_users.append((a, self.height))
            self.user_utxos.append((txid, i))

    def background_tx(self) -> None:
        spendable = [op for op in self.user_utxos if op in self.values]
        self.user_utxos = spendable
        if not spendable:
            self.prefund_users(8)
            self.advance()
            spendable = list(self.user_utxos)
        k = min(len(spendable), self.rng.choice((1, 1, 2)))
        picks = self.rng.sample(range(len(spendable)), k)
        inputs = [spendable[i] for i in sorted(picks)]
        for op in inputs:
            self.user_utxos.remove(op)
        total = sum(self.values[op] for op in inputs) - self.cfg.network_fee
        if total <= 2:
            # too small to move; leave it alone
            return
        recipient = self.seen_user_address() if self.rng.random() < 0.5 else self.user_address()
        if self.rng.random() < 0.3:
            outputs = [(recipient, total)]
        else:
            pay, change = self.distinct_split(total, 0.1, 0.9)
            outputs = [(recipient, pay), (self.user_address(), change)]
            self.rng.shuffle(outputs)
        txid = self.emit(inputs, outputs, "Background")
        for i, (a, _) in enumerate(outputs):
            self.known_users.append((a, self.height))
            self.user_utxos.append((txid, i))

    # chip mixes

    def _deposit_value(self, n: int) -> int:
        fixed = self.cfg.fixed_deposits
        if fixed is not None:
            return fixed[n % len(fixed)]
        return self.rng.randint(*self.cfg.deposit_range)

    def chip_mix(self, isolated: bool) -> None:
        cfg = self.cfg
        fee = cfg.network_fee
        n_users = self.rng.randint(*cfg.users_per_mix)
        deposit_ops = []
        deposit_ids = []
        for _ in range(n_users):
            v = self._deposit_value(len(self.truth.deposits))
            extra = self.rng.randint(10_000, 2_000_000)
            if extra == v:
                extra += 1
            user = self.user_address()
            fund = self.faucet(user, v + extra + fee)
            outputs = [(self.service_address(), v), (user if self.rng.random() < 0.5 else self.user_address(), extra)]
            dep = self.emit([fund], outputs, "Deposit")
            self.truth.fees[dep] = v % cfg.chip_unit
            self.truth.deposits.append(self.flow(dep, 0))
            deposit_ops.append((dep, 0))
            deposit_ids.append(dep)
        self.advance(0, 1)

        carries_in = []
        if not isolated and cfg.change_reuse:
            if self.chip_states and self.chip_states[-1].carries:
                carries_in.append(self.chip_states[-1].carries.pop(0))
            if len(self.chip_states) >= 2 and len(self.chip_states[-2].carries) >= 1:
                carries_in.append(self.chip_states[-2].carries.pop(-1))
        inputs = deposit_ops + carries_in
        total = sum(self.values[op] for op in inputs) - fee
        chip = cfg.chip_unit
        for k in range(cfg.chip_max_doubling, -1, -1):
            if total // (cfg.chip_unit << k) >= cfg.min_chips:
                chip = cfg.chip_unit << k
                break
        n_chips = total // chip
        change = total - n_chips * chip
        outputs = [(self.service_address(), chip) for _ in range(n_chips)]
        if change:
            outputs.append((self.service_address(), change))
        mix = self.emit(inputs, outputs, "ChipMix")
        chip_vouts = list(range(n_chips))
        self._chip_users[mix] = deposit_ids

        if isolated:
            self.truth.isolated_mixes.append(mix)
            self.advance(0, 1)
            for v in chip_vouts:
                if self.rng.random() < 0.7:
                    self.payout([(mix, v)])
            return

        carries = []
        if change and cfg.change_reuse:
            carries.append((mix, n_chips))
        while cfg.change_reuse and len(carries) < 2 and len(chip_vouts) > 1:
            carries.append((mix, chip_vouts.pop()))
        self.chip_states.append(_ChipMixState(mix, carries))
        self.advance(0, 1)
        while chip_vouts:
            take = min(len(chip_vouts), self.rng.randint(1, 3))
            self.payout([(mix, chip_vouts.pop(0)) for _ in range(take)])

    def payout(self, chips: list[tuple[str, int]]) -> str | None:
        total = sum(self.values[op] for op in chips) - self.cfg.network_fee
        if total <= 0:
            return None
        addr = self.seen_user_address() if self.rng.random() < 0.5 else self.user_address()
        txid = self.emit(chips, [(addr, total)], "Payout")
        self.truth.payouts.append(self.flow(txid, 0))
        self.known_users.append((addr, self.height))
        if self.rng.random() < 0.5:
            self.user_utxos.append((txid, 0))
        return txid

    def finish_chip_mixes(self) -> None:
        # sweep the last two mixes' carries together so the tail stays connected
        if len(self.chip_states) >= 2 and self.chip_states[-1].carries and self.chip_states[-2].carries:
            self.advance()
            self.payout([self.chip_states[-1].carries.pop(0), self.chip_states[-2].carries.pop(-1)])

    # CoinJoin

    def coinjoin_round(self, index: int, fee_addrs: list[str]) -> None:
        cfg = self.cfg
        k = self.rng.randint(*cfg.coinjoin_participants)
        denoms = list(cfg.coinjoin_denominations)
        n_groups = max(1, min(len(denoms), k // 2))
        chosen = sorted(self.rng.sample(denoms, n_groups))
        sizes = [2] * n_groups
        for _ in range(k - 2 * n_groups):
            sizes[self.rng.randrange(n_groups)] += 1
        assignment = [d for d, s in zip(chosen, sizes) for _ in range(s)]

        used = set(chosen)
        plan = []
        coord_fee = 0
        for d in assignment:
            share = max(1, round(cfg.coordinator_fee_rate * d))
            coord_fee += share
            remix = None
            if self.remix_pool and self.rng.random() < cfg.remix_probability:
                remix = self.remix_pool.pop(self.rng.randrange(len(self.remix_pool)))
            r = self.values[remix] if remix else 0
            need = d + share + cfg.network_fee
            c = self.rng.randint(10_000, 5_000_000)
            f = need + c - r
            if f < 10_000:
                f = self.rng.randint(10_000, 100_000)
            c = r + f - need
            while c in used:
                f += 1
                c += 1
            used.add(c)
            plan.append((d, c, f, remix))
        while coord_fee in used:
            coord_fee += 1
            d, c, f, remix = plan[0]
            plan[0] = (d, c, f + 1, remix)

        inputs, outputs = [], []
        for d, c, f, remix in plan:
            inputs.append(self.faucet(self.user_address(), f))
            if remix:
                inputs.append(remix)
            outputs.append((self.user_address(), d))
            outputs.append((self.user_address(), c))
        fee_addr = fee_addrs[0] if index < max(1, cfg.coinjoin_rounds // 2) else fee_addrs[-1]
        outputs.append((fee_addr, coord_fee))
        self.advance(0, 1)
        self.rng.shuffle(inputs)
        self.rng.shuffle(outputs)
        txid = self.emit(inputs, outputs, "CoinJoin")
        self.truth.fees[txid] = coord_fee
        self.samples["coinjoin"].append(txid)
        for i, (a, _) in enumerate(outputs):
            if a != fee_addr and self.rng.random() < 0.5:
                self.remix_pool.append((txid, i))

    # peeling chains

    def _collect_target(self) -> int:
        return self.rng.randint(*self.cfg.collector_batch)

    def peel_chain(self) -> None:
        cfg = self.cfg
        fee = cfg.network_fee
        deposit = self.rng.randint(*cfg.chain_deposit_range)
        extra = self.rng.randint(100_000, 10_000_000)
        if extra == deposit:
            extra += 1
        user = self.user_address()
        if cfg.address_mode == "same":
            a = self.rng.randint(fee + 1, deposit + extra - 1)
            funds = [self.faucet(user, a), self.faucet(self.user_address(), deposit + extra + fee - a)]
        else:
            funds = [self.faucet(user, deposit + extra + fee)]
        self.advance(0, 1)
        dep_addr = self.service_address()
        outputs = [(dep_addr, deposit), (self.user_address(), extra)]
        self.rng.shuffle(outputs)
        start = self.emit(funds, outputs, "PeelStart")
        dep_vout = 0 if outputs[0][0] == dep_addr else 1
        self.truth.deposits.append(self.flow(start, dep_vout))

        balance = (start, dep_vout)
        nodes: list[ChainNode] = []
        for _ in range(self.rng.randint(*cfg.chain_length)):
            self.advance(0, 1)
            avail = self.values[balance] - fee
            if avail < 20_000:
                break
            pay, change = self.distinct_split(avail, 0.05, 0.45)
            fresh = cfg.address_mode == "same" and self.rng.random() < cfg.fresh_payout_fraction
            user_addr = self.user_address() if fresh else self.seen_user_address()
            outputs = [(user_addr, pay), (self.service_address(), change)]
            self.rng.shuffle(outputs)
            user_vout = 0 if outputs[0][0] == user_addr else 1
            node = self.emit([balance], outputs, "PeelNode")
            nodes.append(ChainNode(node, user_vout, 1 - user_vout))
            self.truth.payouts.append(self.flow(node, user_vout))
            self.known_users.append((user_addr, self.height))
            if self.rng.random() < 0.3:
                self.user_utxos.append((node, user_vout))
            balance = (node, 1 - user_vout)
        self.chain_parts.append({"start": start, "nodes": nodes, "end": None})
        self.samples["peel"].append(start)
        self.pending_collect.append((len(self.chain_parts) - 1, balance))
        if len(self.pending_collect) >= self.collect_target:
            self.collect()

    def collect(self) -> None:
        if not self.pending_collect:
            return
        inputs = [op for _, op in self.pending_collect]
        while len(inputs) < 5:
            inputs.append(self.faucet(self.service_address(), self.rng.randint(1_000_000, 9_000_000)))
        self.advance(0, 1)
        total = sum(self.values[op] for op in inputs) - self.cfg.network_fee
        end = self.emit(inputs, [(self.service_address(), total)], "PeelEnd")
        for idx, _ in self.pending_collect:
            if self.chain_parts[idx]["nodes"]:
                self.chain_parts[idx]["end"] = end
        self.pending_collect = []
        self.collect_target = self._collect_target()

    # driver

    def run(self) -> GroundTruth:
        cfg = self.cfg
        self.prefund_users(max(16, min(200, cfg.background_txs // 2 + 8)))
        self.advance()
        fee_addrs = [self.new_address("segwit"), self.new_address("segwit")]

        units = (["chip"] * cfg.chip_mixes + ["coinjoin"] * cfg.coinjoin_rounds
                 + ["peel"] * cfg.peeling_chains)
        self.rng.shuffle(units)
        n_isolated = round(cfg.isolated_mix_fraction * cfg.chip_mixes)
        isolated_idx = set(self.rng.sample(range(cfg.chip_mixes), n_isolated))

        n_units = max(1, len(units))
        bg_done = 0
        chip_i = cj_i = 0
        for u, kind in enumerate(units):
            bg_target = cfg.background_txs * u // n_units
            while bg_done < bg_target:
                self.background_tx()
                bg_done += 1
            if kind == "chip":
                self.chip_mix(chip_i in isolated_idx)
                chip_i += 1
            elif kind == "coinjoin":
                self.coinjoin_round(cj_i, fee_addrs)
                cj_i += 1
            else:
                self.peel_chain()
            self.advance(0, 1)
        while bg_done < cfg.background_txs:
            self.background_tx()
            bg_done += 1
        self.finish_chip_mixes()
        self.collect()

        truth = self.truth
        truth.chains = [PeelingChain(p["start"], tuple(p["nodes"]), p["end"],
                                     "collector" if p["end"] else "unspent")
                        for p in self.chain_parts if p["nodes"]]
        truth.service_addresses = sorted(self.service_addrs)
        truth.fee_addresses = fee_addrs if cfg.coinjoin_rounds else []
        self._pick_samples()
        return truth

    def _pick_samples(self) -> None:
        rng = derive_rng(self.cfg.rng_seed, "samples")
        connected = [s.txid for s in self.chip_states]
        mixes = rng.sample(connected, min(20, len(connected)))
        self.truth.samples["chipmix"] = mixes
        deposit_pool = sorted({d for m in mixes for d in self._chip_users[m]})
        mix_set = set(mixes)
        payout_pool = sorted({t.txid for t in self.txs if self.truth.labels[t.txid] == "Payout"
                              and any(i.prev_txid in mix_set for i in t.inputs)})
        self.truth.samples["chip"] = (rng.sample(deposit_pool, min(5, len(deposit_pool)))
                                      + rng.sample(payout_pool, min(15, len(payout_pool))))
        self.truth.samples["coinjoin"] = rng.sample(self.samples["coinjoin"], min(20, len(self.samples["coinjoin"])))
        starts = [c.start for c in self.truth.chains]
        node_pool = [n.txid for c in self.truth.chains for n in c.nodes]
        self.truth.samples["peel"] = (rng.sample(starts, min(6, len(starts)))
                                      + rng.sample(node_pool, min(14, len(node_pool))))


def _convert_roster(truth: GroundTruth, jitter: int, rng: random.Random) -> list[RosterEntry]:
    roster = []
    for f in truth.deposits:
        ts = f.time + (rng.randint(-jitter, jitter) if jitter else 0)
        roster.append(RosterEntry(ConvertRecord("BTC", rng.choice(ALTCOINS), max(0, ts), f.value), f.txid, f.vout))
    for f in truth.payouts:
        ts = f.time + (rng.randint(-jitter, jitter) if jitter else 0)
        roster.append(RosterEntry(ConvertRecord(rng.choice(ALTCOINS), "BTC", max(0, ts), f.value), f.txid, f.vout))
    roster.sort(key=lambda e: (e.record.timestamp, e.txid, e.vout))
    return roster


def emit_convert_records(truth: GroundTruth, jitter: int, rng: random.Random) -> str:
    """One NDJSON convert record per deposit and payout, timestamps jittered uniformly."""
    return dumps_records(e.record for e in _convert_roster(truth, jitter, rng))


def simulate_graph(cfg: SimConfig) -> tuple[TransactionGraph, GroundTruth]:
    sim = _Sim(cfg)
    truth = sim.run()
    truth.records = _convert_roster(truth, cfg.record_jitter, derive_rng(cfg.rng_seed, "records"))
    graph = TransactionGraph(sim.txs)
    assert len(truth.labels) == len(graph)
    return graph, truth


def simulate(cfg: SimConfig) -> tuple[str, GroundTruth]:
    graph, truth = simulate_graph(cfg)
    return export_ndjson(graph), truth


__all__ = ["ALTCOINS", "Flow", "GroundTruth", "LABELS", "RosterEntry", "SimConfig", "SimConfigError",
           "derive_rng", "emit_convert_records", "simulate", "simulate_graph"]
