"""Channel-graph snapshot ingestion and lifespan analysis.

Real payment networks publish channels and capacities but not balances or
rates, so the analysis assumes every channel is initially balanced and every
node pair exchanges payments at the same rate r. Under those assumptions the
direction probability is 1/2 everywhere and a channel's expected lifespan
collapses to a closed form of its capacity and edge betweenness centrality:

    expected payments = (C / omega)^2 / 4
    expected days     = (C / omega)^2 / (8 * EBC * r)

with EBC the undirected edge betweenness, equal to the directed betweenness
of either edge direction on a bidirectional graph.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .network import ChannelKey, PaymentGraph, channel_key, edge_betweenness


@dataclass(frozen=True)
class SnapshotRecord:
    """One channel row of a snapshot file."""

    channel_id: str
    node_a: str
    node_b: str
    capacity: int


@dataclass(frozen=True)
class ChannelLifespan:
    """Analysis output for one channel."""

    channel: ChannelKey
    channel_id: str
    capacity: int
    ebc: float
    expected_payments: float
    expected_days: float  # inf when the channel carries no shortest path


@dataclass(frozen=True)
class LifespanStats:
    average: float
    std: float
    median: float
    count: int


@dataclass(frozen=True)
class SnapshotAnalysis:
    channels: list[ChannelLifespan]  # sorted by ebc, most central first
    all_stats: LifespanStats
    central_stats: LifespanStats
    central_fraction: float
    infinite_count: int
    rate: float
    omega: int


SNAPSHOT_HEADER = ["channel_id", "node_a", "node_b", "capacity_sat"]


def read_snapshot_records(path: str) -> list[SnapshotRecord]:
    """Parse a snapshot CSV, reporting malformed rows with their line numbers."""
    records: list[SnapshotRecord] = []
    bad_lines: list[str] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != SNAPSHOT_HEADER:
            raise ValueError(
                f"{path}: expected header {','.join(SNAPSHOT_HEADER)}, got {header}"
            )
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not field.strip() for field in row):
                continue
            if len(row) != 4:
                bad_lines.append(f"line {line_no}: expected 4 fields, got {len(row)}")
                continue
            channel_id, node_a, node_b, capacity_field = (field.strip() for field in row)
            try:
                capacity = int(capacity_field)
            except ValueError:
                bad_lines.append(f"line {line_no}: capacity {capacity_field!r} is not an integer")
                continue
            if capacity <= 0:
                bad_lines.append(f"line {line_no}: capacity must be positive, got {capacity}")
                continue
            if node_a == node_b:
                bad_lines.append(f"line {line_no}: self-channel on node {node_a!r}")
                continue
            records.append(SnapshotRecord(channel_id, node_a, node_b, capacity))
    if bad_lines:
        raise ValueError(f"{path}: malformed snapshot rows:\n  " + "\n  ".join(bad_lines))
    return records


def load_snapshot(path: str) -> PaymentGraph:
    """Build a balanced bidirectional graph from a snapshot CSV.

    Duplicate channels between the same pair are merged by capacity sum
    (with a warning); funds split evenly.
    """
    records = read_snapshot_records(path)
    if not records:
        raise ValueError(f"{path}: snapshot contains no channels")
    merged: dict[ChannelKey, int] = {}
    labels: dict[ChannelKey, str] = {}
    for rec in records:
        key = channel_key(rec.node_a, rec.node_b)
        if key in merged:
            warnings.warn(
                f"duplicate channel between {key[0]} and {key[1]} "
                f"({labels[key]} and {rec.channel_id}): capacities merged"
            )
            merged[key] += rec.capacity
        else:
            merged[key] = rec.capacity
            labels[key] = rec.channel_id
    channels = {}
    for key, capacity in merged.items():
        half = capacity // 2
        channels[key] = (half, capacity - half)
    nodes = tuple(sorted({n for key in merged for n in key}))
    return PaymentGraph(nodes=nodes, channels=channels, channel_labels=labels)


def _stats(values: np.ndarray) -> LifespanStats:
    if values.size == 0:
        return LifespanStats(math.nan, math.nan, math.nan, 0)
    return LifespanStats(
        average=float(np.mean(values)),
        std=float(np.std(values)),
        median=float(np.median(values)),
        count=int(values.size),
    )


def analyze_snapshot(
    graph: PaymentGraph,
    rate: float,
    omega: int,
    central_fraction: float = 0.14,
) -> SnapshotAnalysis:
    """Expected lifespan of every channel plus distribution statistics.

    Channels with zero betweenness (none in a connected bidirectional graph,
    but kept for safety) are reported with infinite lifespan and excluded
    from the aggregate statistics.
    """
    if rate <= 0:
        raise ValueError("rate must be positive")
    if omega <= 0:
        raise ValueError("omega must be positive")
    if not 0.0 < central_fraction <= 1.0:
        raise ValueError("central_fraction must be in (0, 1]")
    if not graph.channels:
        raise ValueError("graph has no channels")

    ebc = edge_betweenness(graph)
    labels = graph.channel_labels or {}
    rows: list[ChannelLifespan] = []
    for key in graph.channels:
        capacity = graph.capacity(key)
        centrality = ebc[key]  # directed EBC of (lo, hi) == undirected EBC
        payments = (capacity / omega) ** 2 / 4.0
        if centrality > 0:
            days = payments / (2.0 * centrality * rate)
        else:
            days = math.inf
        rows.append(
            ChannelLifespan(
                channel=key,
                channel_id=labels.get(key, f"{key[0]}~{key[1]}"),
                capacity=capacity,
                ebc=centrality,
                expected_payments=payments,
                expected_days=days,
            )
        )
    rows.sort(key=lambda r: (-r.ebc, r.channel))

    finite = np.array([r.expected_days for r in rows if math.isfinite(r.expected_days)])
    central_count = max(1, round(central_fraction * len(rows)))
    central = np.array(
        [r.expected_days for r in rows[:central_count] if math.isfinite(r.expected_days)]
    )
    return SnapshotAnalysis(
        channels=rows,
        all_stats=_stats(finite),
        central_stats=_stats(central),
        central_fraction=central_fraction,
        infinite_count=len(rows) - finite.size,
        rate=rate,
        omega=omega,
    )


def betweenness_lifespan_batches(
    analysis: SnapshotAnalysis, batch_size: int
) -> list[tuple[float, float]]:
    """Mean (ebc, lifespan) per batch of consecutive centrality-ranked channels.

    Channels flagged with infinite lifespan are left out.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    finite = [r for r in analysis.channels if math.isfinite(r.expected_days)]
    batches: list[tuple[float, float]] = []
    for start in range(0, len(finite), batch_size):
        chunk = finite[start : start + batch_size]
        batches.append(
            (
                float(np.mean([r.ebc for r in chunk])),
                float(np.mean([r.expected_days for r in chunk])),
            )
        )
    return batches


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------

def write_analysis_csv(analysis: SnapshotAnalysis, path: str) -> None:
    """Per-channel centrality and lifespan, most central first."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "channel_id",
                "node_a",
                "node_b",
                "capacity_sat",
                "edge_betweenness",
                "expected_payments",
                "expected_lifespan_days",
            ]
        )
        for row in analysis.channels:
            writer.writerow(
                [
                    row.channel_id,
                    row.channel[0],
                    row.channel[1],
                    row.capacity,
                    f"{row.ebc:.6f}",
                    f"{row.expected_payments:.6f}",
                    "inf" if math.isinf(row.expected_days) else f"{row.expected_days:.6f}",
                ]
            )


def write_stats_summary(analysis: SnapshotAnalysis, path: str) -> None:
    """Average / STD / median lifespans, all channels vs. the central subset."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["statistic_days", "all_channels", f"central_top_{analysis.central_fraction:g}"]
        )
        writer.writerow(
            ["average", f"{analysis.all_stats.average:.6f}", f"{analysis.central_stats.average:.6f}"]
        )
        writer.writerow(["std", f"{analysis.all_stats.std:.6f}", f"{analysis.central_stats.std:.6f}"])
        writer.writerow(
            ["median", f"{analysis.all_stats.median:.6f}", f"{analysis.central_stats.median:.6f}"]
        )
        writer.writerow(["count", analysis.all_stats.count, analysis.central_stats.count])
        writer.writerow(["infinite_lifespan_excluded", analysis.infinite_count, ""])


def lifespan_histogram(
    analysis: SnapshotAnalysis, bins: int = 50
) -> tuple[np.ndarray, np.ndarray]:
    """Histogram (counts, bin_edges) of finite expected lifespans in days."""
    finite = np.array(
        [r.expected_days for r in analysis.channels if math.isfinite(r.expected_days)]
    )
    counts, edges = np.histogram(finite, bins=bins)
    return counts, edges


def write_histogram_csv(analysis: SnapshotAnalysis, path: str, bins: int = 50) -> None:
    counts, edges = lifespan_histogram(analysis, bins)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_left_days", "bin_right_days", "channel_count"])
        for i, count in enumerate(counts):
            writer.writerow([f"{edges[i]:.6f}", f"{edges[i + 1]:.6f}", int(count)])


def write_batches_csv(analysis: SnapshotAnalysis, path: str, batch_size: int) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["batch_mean_edge_betweenness", "batch_mean_lifespan_days"])
        for ebc_mean, life_mean in betweenness_lifespan_batches(analysis, batch_size):
            writer.writerow([f"{ebc_mean:.6f}", f"{life_mean:.6f}"])
