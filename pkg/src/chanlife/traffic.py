"""Synthetic workload generation: random networks, rate matrices, payment streams.

All generators are pure functions of (parameters, seed); the same seed
reproduces the same graph, matrix or stream byte-for-byte.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .network import Node, PaymentGraph, RatesMatrix

DEFAULT_CAPACITY_SAT = 2_400_000  # snapshot-average channel capacity


@dataclass(frozen=True)
class MRatesConfig:
    """Knobs of the synthetic rates matrix.

    sparse_coefficient is the probability that a node pair exchanges no
    payments at all; skew is the ratio between the two directional rates of
    an active pair (1 = symmetric matrix).
    """

    n: int
    sparse_coefficient: float
    skew: float
    base_rate: float
    seed: int

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError("need at least 2 nodes")
        if not 0.0 <= self.sparse_coefficient <= 1.0:
            raise ValueError("sparse_coefficient must be in [0, 1]")
        if self.skew < 1.0:
            raise ValueError("skew must be >= 1")
        if self.base_rate <= 0:
            raise ValueError("base_rate must be positive")


@dataclass(frozen=True)
class PaymentEvent:
    """One payment: arrival time in days since start, endpoints, amount in sat."""

    time: float
    source: Node
    destination: Node
    amount: int


def random_network(
    n: int,
    edge_prob: float,
    seed: int,
    capacity: int | Callable[[Node, Node], int] = DEFAULT_CAPACITY_SAT,
) -> PaymentGraph:
    """G(n, p) channel graph: each unordered pair gets a channel independently.

    Channels start balanced; capacity is a constant or a per-channel callable.
    """
    if n < 2:
        raise ValueError("need at least 2 nodes")
    if not 0.0 <= edge_prob <= 1.0:
        raise ValueError("edge_prob must be in [0, 1]")
    rng = np.random.default_rng(seed)
    channels: dict[tuple[int, int], tuple[int, int]] = {}
    for u in range(n):
        draws = rng.random(n - u - 1)
        for offset, r in enumerate(draws):
            if r < edge_prob:
                v = u + 1 + offset
                cap = capacity(u, v) if callable(capacity) else capacity
                half = cap // 2
                channels[(u, v)] = (half, cap - half)
    return PaymentGraph(nodes=tuple(range(n)), channels=channels)


def generate_mrates(config: MRatesConfig) -> RatesMatrix:
    """Rates matrix with the configured sparseness and directional skew.

    Per unordered pair {s, t} with s < t: with probability sparse_coefficient
    both directions are zero; otherwise (s, t) pays base_rate and (t, s) pays
    base_rate / skew.
    """
    rng = np.random.default_rng(config.seed)
    rates: dict[tuple[Node, Node], float] = {}
    back_rate = config.base_rate / config.skew
    for s in range(config.n):
        draws = rng.random(config.n - s - 1)
        for offset, r in enumerate(draws):
            if r >= config.sparse_coefficient:
                t = s + 1 + offset
                rates[(s, t)] = config.base_rate
                rates[(t, s)] = back_rate
    return RatesMatrix(rates)


def _sample_stream_arrays(
    rates: RatesMatrix, horizon: float, rng: np.random.Generator
) -> tuple[np.ndarray, list[Node], list[Node]]:
    # Homogeneous Poisson on [0, horizon] per pair: Poisson count, uniform
    # times, then one global time sort. Pairs drawn in sorted order so the
    # stream is a deterministic function of the seed.
    pairs = sorted(rates.pairs(), key=lambda item: repr(item[0]))
    if not pairs:
        return np.empty(0), [], []
    pair_rates = np.array([r for _, r in pairs])
    counts = rng.poisson(pair_rates * horizon)
    total = int(counts.sum())
    times = rng.random(total) * horizon
    order = np.argsort(times, kind="stable")
    times = times[order]

    sources: list[Node] = [None] * total
    destinations: list[Node] = [None] * total
    starts = np.concatenate(([0], np.cumsum(counts)))
    position = np.empty(total, dtype=np.int64)
    for k, ((s, t), _) in enumerate(pairs):
        position[starts[k]:starts[k + 1]] = k
    position = position[order]
    for i, k in enumerate(position):
        s, t = pairs[k][0]
        sources[i] = s
        destinations[i] = t
    return times, sources, destinations


def generate_payment_stream(
    rates: RatesMatrix, horizon: float, omega: int, seed: int
) -> list[PaymentEvent]:
    """Time-sorted payments over [0, horizon] days, Poisson per node pair."""
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if omega <= 0:
        raise ValueError("omega must be positive")
    rng = np.random.default_rng(seed)
    times, sources, destinations = _sample_stream_arrays(rates, horizon, rng)
    return [
        PaymentEvent(time=float(t), source=s, destination=d, amount=omega)
        for t, s, d in zip(times, sources, destinations)
    ]


def write_event_log(events: Iterable[PaymentEvent], path: str) -> None:
    """CSV event log so a workload can be replayed across runs."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_days", "source", "destination", "amount_sat"])
        for ev in events:
            writer.writerow([repr(ev.time), ev.source, ev.destination, ev.amount])


def _parse_node(field: str) -> Node:
    try:
        return int(field)
    except ValueError:
        return field


def read_event_log(path: str) -> list[PaymentEvent]:
    """Read an event log written by write_event_log.

    Integer-looking node ids come back as ints so replays match generated
    graphs; anything else stays a string.
    """
    events: list[PaymentEvent] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["time_days", "source", "destination", "amount_sat"]:
            raise ValueError(f"unrecognized event-log header in {path}: {header}")
        for row in reader:
            events.append(
                PaymentEvent(
                    time=float(row[0]),
                    source=_parse_node(row[1]),
                    destination=_parse_node(row[2]),
                    amount=int(row[3]),
                )
            )
    return events
