"""Forensics toolkit for Bitcoin mixing services.

Ingests a UTXO transaction graph, detects anonymity sets, expands known mixing
transactions, recovers peeling chains, traces taint into mixers, estimates
service fees and matches exchange convert records to on-chain transactions.
"""

from mixscope.addresses import Address, AddressKind, classify_address_type
from mixscope.expansion import ColorTrace, ExpansionResult, SeedError, color_trace, seed_expand
from mixscope.heuristics import (AnonymitySet, HeuristicsConfig, Mechanism, MechanismVerdict,
                                 change_output_candidate, classify_mechanism, detect_anonymity_sets)
from mixscope.matcher import ConvertRecord, MatchResult, MatcherConfig, match_records, reverse_match
from mixscope.peeling import (PeelingChain, PeelingConfig, extend_chain, find_ending_points,
                              find_starting_point, recover_chain)
from mixscope.simulator import GroundTruth, SimConfig, simulate, simulate_graph
from mixscope.taint import (ProfitReport, TaintConfig, TaintReport, common_output_addresses,
                            estimate_pwyw_fees, trace_taint)
from mixscope.txgraph import GraphError, IngestError, Transaction, TransactionGraph, ingest_ndjson, load_graph

__version__ = "0.1.0"

__all__ = [
    "Address", "AddressKind", "AnonymitySet", "ColorTrace", "ConvertRecord", "ExpansionResult", "GraphError",
    "HeuristicsConfig", "IngestError", "MatchResult", "MatcherConfig", "Mechanism", "MechanismVerdict",
    "PeelingChain", "PeelingConfig", "ProfitReport", "SeedError", "TaintConfig", "TaintReport", "Transaction",
    "TransactionGraph", "change_output_candidate", "classify_address_type", "classify_mechanism",
    "color_trace", "common_output_addresses", "detect_anonymity_sets", "estimate_pwyw_fees", "extend_chain",
    "find_ending_points", "find_starting_point", "GroundTruth", "ingest_ndjson", "load_graph", "match_records",
    "recover_chain", "reverse_match", "seed_expand", "SimConfig", "simulate", "simulate_graph", "trace_taint",
]
