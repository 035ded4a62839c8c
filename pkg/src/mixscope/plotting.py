"""Matplotlib figures for CLI reports, rendered headless to files."""

from __future__ import annotations

from collections import Counter
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from mixscope.peeling import PeelingChain  # noqa: E402
from mixscope.taint import ProfitReport, TaintReport  # noqa: E402
from mixscope.units import SAT_PER_BTC  # noqa: E402

# dropping version and date stamps keeps output bytes stable across runs
_META = {
    ".png": {"Software": None},
    ".svg": {"Date": None, "Creator": None},
    ".pdf": {"CreationDate": None, "Creator": None, "Producer": None},
}


def _save(fig, path: Path) -> None:
    fig.tight_layout()
    with plt.rc_context({"svg.hashsalt": "mixscope"}):  # stable SVG element ids
        fig.savefig(path, dpi=100, metadata=_META.get(Path(path).suffix.lower()))
    plt.close(fig)


def plot_profit(report: ProfitReport, path: Path, title: str = "Estimated service fees") -> None:
    months = list(report.buckets)
    values = [report.buckets[m] / SAT_PER_BTC for m in months]
    fig, ax = plt.subplots(figsize=(max(5.0, 0.35 * len(months) + 2), 3.5))
    ax.bar(range(len(months)), values, color="tab:blue")
    ax.axhline(report.monthly_average / SAT_PER_BTC, color="k", linestyle="--", linewidth=1,
               label=f"monthly average {report.monthly_average / SAT_PER_BTC:.4f} BTC")
    ax.set_xticks(range(len(months)))
    ax.set_xticklabels(months, rotation=60, ha="right", fontsize=7)
    ax.set_ylabel("BTC")
    ax.set_title(title)
    ax.legend(fontsize=8)
    _save(fig, path)


def plot_taint_depths(report: TaintReport, path: Path) -> None:
    by_depth: Counter[int] = Counter()
    for h in report.hits:
        by_depth[h.depth] += h.value
    depths = sorted(by_depth)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.bar(depths, [by_depth[d] / SAT_PER_BTC for d in depths], color="tab:blue")
    ax.set_xlabel("depth from root")
    ax.set_ylabel("BTC reaching mixer")
    ax.set_title(f"{len(report.hits)} hits, {report.total_value / SAT_PER_BTC:.8f} BTC")
    _save(fig, path)


def plot_chain_lengths(chains: list[PeelingChain], path: Path) -> None:
    counts = Counter(len(c.nodes) for c in chains)
    lengths = sorted(counts)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.bar(lengths, [counts[n] for n in lengths], color="tab:orange")
    ax.set_xlabel("chain nodes")
    ax.set_ylabel("chains")
    ax.set_title(f"{len(chains)} peeling chains")
    _save(fig, path)


__all__ = ["plot_chain_lengths", "plot_profit", "plot_taint_depths"]
