from __future__ import annotations

import functools
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mixscope.simulator import SimConfig, simulate_graph  # noqa: E402

ACCEPTANCE_RESULTS: dict[int, tuple[str, bool, str]] = {}


@functools.lru_cache(maxsize=None)
def cached_sim(**kwargs):
    return simulate_graph(SimConfig(**kwargs))


@pytest.fixture(scope="session")
def chip_sim():
    return cached_sim(rng_seed=11, chip_mixes=60, background_txs=120)


@pytest.fixture(scope="session")
def coinjoin_sim():
    return cached_sim(rng_seed=12, coinjoin_rounds=30, background_txs=60)


@pytest.fixture(scope="session")
def peel_sim():
    return cached_sim(rng_seed=13, peeling_chains=40, background_txs=80)


@pytest.fixture(scope="session")
def mixed_sim():
    return cached_sim(rng_seed=14, chip_mixes=30, coinjoin_rounds=15, peeling_chains=15, background_txs=150)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        name, ok, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n:2d}. {name}: {detail}")
