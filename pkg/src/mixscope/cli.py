"""Command-line front end: ``mixscope <subcommand> ...``.

Every subcommand is a thin adapter over the library.  JSON goes to stdout or
``--out``; diagnostics go to stderr.  Exit codes: 0 ok, 1 usage, 2 bad input
data, 3 analysis failure.  Each run also produces a manifest with content
digests of its inputs and outputs.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

from mixscope import __version__
from mixscope.dot import chain_to_dot, expansion_to_dot, taint_to_dot
from mixscope.expansion import SeedError, seed_expand
from mixscope.heuristics import HeuristicsConfig, classify_mechanism, detect_anonymity_sets
from mixscope.matcher import (MatchError, MatcherConfig, dumps_results, match_records, read_records,
                              reverse_match, set_validator, unknown_validator)
from mixscope.peeling import (PeelingChain, PeelingConfig, UnboundedChainError, find_ending_points,
                              group_by_collector, recover_chain)
from mixscope.simulator import SimConfig, derive_rng, emit_convert_records, simulate
from mixscope.taint import (TaintConfig, TaintReport, common_output_addresses, estimate_address_fees,
                            estimate_pwyw_fees, trace_taint)
from mixscope.txgraph import GraphError, TransactionGraph, ingest_ndjson
from mixscope.units import btc_to_sat

log = logging.getLogger("mixscope")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_ANALYSIS = 0, 1, 2, 3


class DataError(Exception):
    """Input files could not be read or parsed."""


class AnalysisError(Exception):
    """Inputs were fine but the requested analysis cannot be carried out."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _btc(text: str) -> int:
    try:
        return btc_to_sat(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _u64(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("must be a 64-bit unsigned integer")
    return v


def _fraction(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError("must be within [0, 1]")
    return v


# I/O helpers

@dataclass
class RunManifest:
    subcommand: str
    config: dict
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)
    wall_time_s: float = 0.0

    def to_json(self) -> dict:
        return {"subcommand": self.subcommand, "version": __version__, "config": self.config,
                "inputs": dict(sorted(self.inputs.items())), "outputs": dict(sorted(self.outputs.items())),
                "wall_time_s": round(self.wall_time_s, 3)}


def _digest(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()


def write_atomic(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


class _Run:
    def __init__(self, args: argparse.Namespace):
        self.args = args
        config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "manifest")}
        self.manifest = RunManifest(args.command, json.loads(json.dumps(config, default=str)))

    def read_bytes(self, path: str | Path) -> bytes:
        try:
            data = Path(path).read_bytes()
        except OSError as exc:
            raise DataError(f"cannot read {path}: {exc.strerror or exc}") from None
        self.manifest.inputs[str(path)] = _digest(data)
        return data

    def read_json(self, path: str | Path):
        try:
            return json.loads(self.read_bytes(path))
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise DataError(f"{path}: invalid JSON: {exc}") from None

    def graph(self) -> TransactionGraph:
        path = self.args.graph
        data = self.read_bytes(path)
        try:
            return ingest_ndjson(data)
        except GraphError as exc:
            raise DataError(f"{path}: {exc}") from None

    def write(self, path: Path, text: str | bytes) -> None:
        data = text.encode("utf-8") if isinstance(text, str) else text
        write_atomic(path, data)
        self.manifest.outputs[str(path)] = _digest(data)

    def emit(self, text: str) -> None:
        """Primary output: --out if given, else stdout."""
        out = getattr(self.args, "out", None)
        if out:
            self.write(Path(out), text)
        else:
            sys.stdout.write(text)
            self.manifest.outputs["<stdout>"] = _digest(text.encode("utf-8"))

    def figure(self, render, *payload) -> None:
        path = getattr(self.args, "figure", None)
        if not path:
            return
        from mixscope import plotting
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        getattr(plotting, render)(*payload, path)
        self.manifest.outputs[str(path)] = _digest(path.read_bytes())

    def finish(self, started: float) -> None:
        self.manifest.wall_time_s = time.monotonic() - started
        text = dumps_json(self.manifest.to_json())
        target = getattr(self.args, "manifest", None)
        out = getattr(self.args, "out", None)
        if target:
            write_atomic(Path(target), text.encode("utf-8"))
        elif out and self.args.command == "simulate":
            write_atomic(Path(out) / "manifest.json", text.encode("utf-8"))
        elif out:
            write_atomic(Path(str(out) + ".manifest.json"), text.encode("utf-8"))
        else:
            log.info("manifest: %s", json.dumps(self.manifest.to_json(), sort_keys=True))


def _txid_list(run: _Run, values: list[str], what: str) -> list[str]:
    """Txids given inline or as @file (JSON list, expand output, or one per line)."""
    out: list[str] = []
    for v in values:
        if not v.startswith("@"):
            out.append(v)
            continue
        path = v[1:]
        raw = run.read_bytes(path).decode("utf-8", errors="replace")
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError:
            obj = [line.strip() for line in raw.splitlines() if line.strip()]
        out.extend(_members_of(obj, path))
    if not out:
        raise DataError(f"no {what} given")
    return out


def _members_of(obj, path) -> list[str]:
    if isinstance(obj, dict):
        obj = obj.get("members")
    if not isinstance(obj, list) or not all(isinstance(t, str) for t in obj):
        raise DataError(f"{path}: expected a list of txids or an object with a 'members' list")
    return obj


def _check_known(graph: TransactionGraph, txids: list[str], what: str) -> None:
    missing = [t for t in txids if t not in graph]
    if missing:
        raise AnalysisError(f"{what} not in graph: {', '.join(missing[:3])}"
                            + (f" (+{len(missing) - 3} more)" if len(missing) > 3 else ""))


def _heuristics(args) -> HeuristicsConfig:
    return HeuristicsConfig(min_set_size=args.min_set_size)


# subcommands

def cmd_ingest_check(run: _Run) -> None:
    g = run.graph()
    heights = g.heights
    txs = list(g)
    addresses = {o.address.text for tx in txs for o in tx.outputs}
    run.emit(dumps_json({
        "transactions": len(txs),
        "coinbase": sum(tx.is_coinbase for tx in txs),
        "inputs": sum(len(tx.inputs) for tx in txs),
        "outputs": sum(len(tx.outputs) for tx in txs),
        "addresses": len(addresses),
        "heights": [heights[0], heights[-1]] if heights else None,
        "blocks": len(heights),
    }))


def cmd_simulate(run: _Run) -> None:
    a = run.args
    if a.config:
        base = run.read_json(a.config)
        try:
            cfg = SimConfig.from_json({**base, "rng_seed": a.seed})
        except (TypeError, ValueError) as exc:
            raise DataError(f"{a.config}: {exc}") from None
    else:
        try:
            cfg = SimConfig(
                rng_seed=a.seed, chip_mixes=a.chip_mixes, coinjoin_rounds=a.coinjoin_rounds,
                peeling_chains=a.peeling_chains, background_txs=a.background_txs, chip_unit=a.chip_unit,
                isolated_mix_fraction=a.isolated_fraction, address_mode=a.address_mode,
                record_jitter=a.record_jitter, mean_block_interval=a.block_interval,
            )
        except ValueError as exc:
            raise AnalysisError(str(exc)) from None
    ndjson, truth = simulate(cfg)
    out = Path(a.out)
    run.write(out / "txs.ndjson", ndjson)
    run.write(out / "groundtruth.json", truth.dumps())
    run.write(out / "records.ndjson",
              emit_convert_records(truth, cfg.record_jitter, derive_rng(cfg.rng_seed, "records")))
    run.write(out / "simconfig.json", dumps_json(cfg.to_json()))
    log.info("simulated %d transactions into %s", len(truth.labels), out)


def cmd_detect_sets(run: _Run) -> None:
    g = run.graph()
    cfg = _heuristics(run.args)
    txids = _txid_list(run, run.args.txids, "txids") if run.args.txids else g.txids()
    _check_known(g, txids, "txid")
    found = []
    for txid in txids:
        sets = detect_anonymity_sets(g.tx(txid), cfg)
        if sets or run.args.txids:
            found.append({"txid": txid, "sets": [s.to_json() for s in sets]})
    run.emit(dumps_json({"transactions": found, "count": sum(bool(f["sets"]) for f in found)}))


def cmd_classify(run: _Run) -> None:
    g = run.graph()
    samples = _txid_list(run, run.args.samples, "samples")
    _check_known(g, samples, "sample")
    verdict = classify_mechanism(samples, g, _heuristics(run.args))
    run.emit(dumps_json(verdict.to_json()))


def cmd_expand(run: _Run) -> None:
    g = run.graph()
    seeds = _txid_list(run, run.args.seeds, "seeds")
    try:
        result = seed_expand(g, seeds, _heuristics(run.args))
    except SeedError as exc:
        raise AnalysisError(str(exc)) from None
    run.emit(dumps_json(result.to_json(trace=run.args.trace)))


def cmd_chains(run: _Run) -> None:
    g = run.graph()
    cfg = PeelingConfig(many_inputs_threshold=run.args.many_inputs)
    txids = _txid_list(run, run.args.txids, "txids")
    _check_known(g, txids, "txid")
    chains: dict[str, PeelingChain] = {}
    try:
        for txid in txids:
            chain = recover_chain(g, txid, cfg)
            chains.setdefault(chain.start, chain)
    except UnboundedChainError as exc:
        raise AnalysisError(str(exc)) from None
    ordered = [chains[s] for s in sorted(chains, key=lambda t: g.tx(t).sort_key)]
    ends = find_ending_points(g, ordered, cfg)
    run.emit(dumps_json({"chains": [c.to_json() for c in ordered],
                         "collectors": group_by_collector(ends)}))
    run.figure("plot_chain_lengths", ordered)


def cmd_trace(run: _Run) -> None:
    g = run.graph()
    a = run.args
    mixing = _txid_list(run, [a.mixing if a.mixing.startswith("@") else "@" + a.mixing], "mixing transactions")
    if a.root not in g:
        raise AnalysisError(f"root {a.root} not in graph")
    report = trace_taint(g, a.root, mixing, TaintConfig(max_depth=a.max_depth, min_output=a.min_output))
    run.emit(dumps_json(report.to_json()))
    run.figure("plot_taint_depths", report)


def cmd_profit(run: _Run) -> None:
    g = run.graph()
    a = run.args
    mixing = _txid_list(run, [a.mixing if a.mixing.startswith("@") else "@" + a.mixing], "mixing transactions")
    _check_known(g, mixing, "mixing transaction")
    if a.method == "pwyw":
        report = estimate_pwyw_fees(g, mixing, a.chip_unit)
        extra = {}
    else:
        fee_addrs = a.fee_address
        if not fee_addrs:
            common = common_output_addresses(g, mixing, a.fee_fraction)
            fee_addrs = [addr for addr, _ in common]
        report = estimate_address_fees(g, fee_addrs, mixing)
        extra = {"fee_addresses": sorted(fee_addrs)}
    run.emit(dumps_json({"method": a.method, **report.to_json(), **extra}))
    run.figure("plot_profit", report)


def cmd_match(run: _Run) -> None:
    g = run.graph()
    a = run.args
    data = run.read_bytes(a.records)
    try:
        records = read_records(data)
    except GraphError as exc:
        raise DataError(f"{a.records}: {exc}") from None
    validator = unknown_validator
    if a.service_addresses:
        obj = run.read_json(a.service_addresses)
        if isinstance(obj, dict):
            obj = obj.get("service_addresses", [])
        if not isinstance(obj, list):
            raise DataError(f"{a.service_addresses}: expected a list of addresses")
        validator = set_validator(obj)
    try:
        cfg = MatcherConfig(window_blocks=a.window_blocks, value_tolerance=a.tolerance,
                            legacy_deltas=tuple(a.legacy_deltas) if a.legacy_deltas else None)
    except ValueError as exc:
        raise AnalysisError(str(exc)) from None
    if a.reverse:
        results = reverse_match(g, records, cfg, validator, target=a.target)
    else:
        results = match_records(g, [r for r in records if r.cur_in == a.target], cfg, validator)
    run.emit(dumps_results(results))
    log.info("matched %d of %d records", sum(r.matched for r in results), len(results))


def cmd_export_dot(run: _Run) -> None:
    g = run.graph()
    a = run.args
    if a.taint:
        try:
            report = TaintReport.from_json(run.read_json(a.taint))
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{a.taint}: not a taint report ({exc})") from None
        text = taint_to_dot(g, report)
    elif a.chains:
        obj = run.read_json(a.chains)
        try:
            chains = [PeelingChain.from_json(c) for c in obj["chains"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{a.chains}: not a chains report ({exc})") from None
        text = chain_to_dot(g, chains)
    else:
        members = _txid_list(run, ["@" + a.members], "members")
        _check_known(g, members, "member")
        text = expansion_to_dot(members)
    run.emit(text)


# parser

class _HelpFormatter(argparse.ArgumentDefaultsHelpFormatter):
    # show defaults, but not when the help already states one in BTC or there is none
    def _get_help_string(self, action):
        if action.default is None or "default:" in (action.help or ""):
            return action.help
        return super()._get_help_string(action)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mixscope", description="Forensic analyses of Bitcoin mixing services.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_, graph=True, out=True):
        sp = sub.add_parser(name, help=help_, description=help_,
                            formatter_class=_HelpFormatter)
        sp.set_defaults(func=func)
        if graph:
            sp.add_argument("--graph", required=True, help="transaction graph, NDJSON")
        if out:
            sp.add_argument("--out", help="output file (default: stdout)")
        sp.add_argument("--manifest", help="where to write the run manifest")
        return sp

    add("ingest-check", cmd_ingest_check, "validate a transaction file and print summary counts")

    sp = add("simulate", cmd_simulate, "generate a synthetic corpus with ground truth", graph=False, out=False)
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--seed", type=_u64, default=0, help="RNG seed (u64)")
    sp.add_argument("--config", help="SimConfig JSON; overrides scenario flags (seed still applies)")
    sp.add_argument("--chip-mixes", type=int, default=0)
    sp.add_argument("--coinjoin-rounds", type=int, default=0)
    sp.add_argument("--peeling-chains", type=int, default=0)
    sp.add_argument("--background-txs", type=int, default=0)
    sp.add_argument("--chip-unit", type=_btc, default=btc_to_sat("0.001"), metavar="BTC",
                    help="chip denomination in BTC (default: 0.001)")
    sp.add_argument("--isolated-fraction", type=_fraction, default=0.0,
                    help="fraction of chip mixes whose outputs are never co-spent")
    sp.add_argument("--address-mode", choices=("disjoint", "same"), default="disjoint")
    sp.add_argument("--record-jitter", type=int, default=0, help="convert record jitter, seconds")
    sp.add_argument("--block-interval", type=float, default=600.0, help="mean seconds between blocks")

    sp = add("detect-sets", cmd_detect_sets, "list anonymity sets (all transactions, or the given ones)")
    sp.add_argument("--txids", nargs="*", default=[], help="txids or @file")
    sp.add_argument("--min-set-size", type=int, default=2, help="smallest anonymity set")

    sp = add("classify", cmd_classify, "classify the mixing mechanism of sample transactions")
    sp.add_argument("--samples", nargs="+", required=True, help="txids or @file")
    sp.add_argument("--min-set-size", type=int, default=2, help="smallest anonymity set")

    sp = add("expand", cmd_expand, "expand seed mixing transactions to the full mixing set")
    sp.add_argument("--seeds", nargs="+", required=True, help="txids or @file")
    sp.add_argument("--min-set-size", type=int, default=2, help="smallest anonymity set")
    sp.add_argument("--trace", action="store_true", help="include the frontier log")

    sp = add("chains", cmd_chains, "recover peeling chains through the given transactions")
    sp.add_argument("--txids", nargs="+", required=True, help="txids or @file")
    sp.add_argument("--many-inputs", type=int, default=5, help="input count marking a collector")
    sp.add_argument("--figure", help="write a chain-length histogram (PNG/PDF/SVG)")

    sp = add("trace", cmd_trace, "trace taint forward from a root into a mixing set")
    sp.add_argument("--root", required=True)
    sp.add_argument("--mixing", required=True, help="mixing set: JSON list or expand output")
    sp.add_argument("--max-depth", type=int, default=50, help="hops to follow from the root")
    sp.add_argument("--min-output", type=_btc, default=btc_to_sat("0.9"), metavar="BTC",
                    help="ignore outputs below this many BTC (default: 0.9)")
    sp.add_argument("--figure", help="write hit value by depth (PNG/PDF/SVG)")

    sp = add("profit", cmd_profit, "estimate service fees per month")
    sp.add_argument("--mixing", required=True, help="mixing set: JSON list or expand output")
    sp.add_argument("--method", choices=("pwyw", "address"), default="pwyw")
    sp.add_argument("--chip-unit", type=_btc, default=btc_to_sat("0.001"), metavar="BTC",
                    help="chip denomination in BTC (default: 0.001)")
    sp.add_argument("--fee-address", action="append", default=[],
                    help="coordinator fee address (repeatable); inferred when omitted")
    sp.add_argument("--fee-fraction", type=_fraction, default=0.3,
                    help="occurrence fraction for inferring fee addresses")
    sp.add_argument("--figure", help="write monthly fee bars (PNG/PDF/SVG)")

    sp = add("match", cmd_match, "match convert records to on-chain transactions")
    sp.add_argument("--records", required=True, help="convert records, NDJSON")
    sp.add_argument("--window-blocks", type=int, default=7, help="odd block window centered on the closest block")
    sp.add_argument("--tolerance", type=int, default=0, help="value tolerance, satoshis")
    sp.add_argument("--legacy-deltas", type=int, nargs=2, metavar=("AFTER", "BEFORE"),
                    help="skewed window instead of the centered one")
    sp.add_argument("--reverse", action="store_true", help="match records converting into --target")
    sp.add_argument("--target", default="BTC")
    sp.add_argument("--service-addresses", help="JSON list of known service addresses (validator)")

    sp = add("export-dot", cmd_export_dot, "render an analysis result as Graphviz DOT")
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--taint", help="trace output JSON")
    src.add_argument("--chains", help="chains output JSON")
    src.add_argument("--members", help="expand output JSON or txid list")
    return p


def _setup_logging() -> None:
    level = os.environ.get("MIXSCOPE_LOG", "warn").lower()
    levels = {"error": logging.ERROR, "warn": logging.WARNING, "warning": logging.WARNING,
              "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    run = _Run(args)
    started = time.monotonic()
    try:
        args.func(run)
    except DataError as exc:
        log.error("%s", exc)
        return EXIT_DATA
    except (AnalysisError, MatchError, GraphError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_ANALYSIS
    run.finish(started)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
