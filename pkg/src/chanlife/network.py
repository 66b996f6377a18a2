"""Directed payment-graph topology and rate aggregation.

Channels are bidirectional: one channel between nodes u and v is stored once
under its sorted key and exposes the two directed edges (u, v) and (v, u).
Shortest paths are hop-count shortest on the unweighted directed graph.

Per-edge payment rates aggregate the rates matrix over all ordered node
pairs, each pair split across its shortest paths:

    rate(edge) = sum over (s, t), s != t, of
                 (shortest s->t paths through edge / all shortest s->t paths)
                 * pair rate (s, t)

computed with a single-source BFS accumulation (Brandes-style, generalized
to per-target weights). With all pair rates equal to 1 this is exactly the
directed edge betweenness centrality.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Iterator

from .walk import direction_probability

Node = Hashable
DirectedEdge = tuple[Node, Node]
ChannelKey = tuple[Node, Node]
EdgeBetweenness = dict[DirectedEdge, float]


def channel_key(u: Node, v: Node) -> ChannelKey:
    """Canonical (sorted) key of the channel between u and v."""
    return (u, v) if u <= v else (v, u)


@dataclass(frozen=True)
class PaymentGraph:
    """Bidirectional channel graph with per-endpoint funds in satoshi.

    channels maps the canonical (u, v) key (u < v) to (fund_u, fund_v).
    Optional channel_labels carries external channel ids (snapshots).
    """

    nodes: tuple[Node, ...]
    channels: dict[ChannelKey, tuple[int, int]]
    channel_labels: dict[ChannelKey, str] | None = None
    _adjacency: dict[Node, tuple[Node, ...]] = field(
        init=False, repr=False, compare=False, default=None  # type: ignore[assignment]
    )

    def __post_init__(self) -> None:
        adjacency: dict[Node, list[Node]] = {n: [] for n in self.nodes}
        for (u, v) in self.channels:
            if u == v:
                raise ValueError(f"self-loop channel on node {u!r}")
            if (u, v) != channel_key(u, v):
                raise ValueError(f"channel key {(u, v)!r} is not canonical")
            if u not in adjacency or v not in adjacency:
                raise ValueError(f"channel {(u, v)!r} references unknown node")
            adjacency[u].append(v)
            adjacency[v].append(u)
        frozen = {n: tuple(sorted(neigh)) for n, neigh in adjacency.items()}
        object.__setattr__(self, "_adjacency", frozen)

    @classmethod
    def from_channels(
        cls,
        records: Iterable[tuple[Node, Node, int, int]],
        labels: dict[ChannelKey, str] | None = None,
    ) -> "PaymentGraph":
        """Build from (node_a, node_b, fund_a_sat, fund_b_sat) records."""
        channels: dict[ChannelKey, tuple[int, int]] = {}
        nodes: set[Node] = set()
        for node_a, node_b, fund_a, fund_b in records:
            if node_a == node_b:
                raise ValueError(f"self-loop channel on node {node_a!r}")
            key = channel_key(node_a, node_b)
            if key in channels:
                raise ValueError(f"duplicate channel {key!r}")
            channels[key] = (fund_a, fund_b) if key == (node_a, node_b) else (fund_b, fund_a)
            nodes.add(node_a)
            nodes.add(node_b)
        return cls(nodes=tuple(sorted(nodes)), channels=channels, channel_labels=labels)

    def neighbors(self, node: Node) -> tuple[Node, ...]:
        return self._adjacency[node]

    def has_edge(self, u: Node, v: Node) -> bool:
        return channel_key(u, v) in self.channels and u != v

    def directed_edges(self) -> Iterator[DirectedEdge]:
        for (u, v) in self.channels:
            yield (u, v)
            yield (v, u)

    def fund(self, u: Node, v: Node) -> int:
        """Fund owned by u in the channel between u and v."""
        key = channel_key(u, v)
        fund_lo, fund_hi = self.channels[key]
        return fund_lo if key[0] == u else fund_hi

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    def capacity(self, key: ChannelKey) -> int:
        fund_lo, fund_hi = self.channels[key]
        return fund_lo + fund_hi


@dataclass(frozen=True)
class RatesMatrix:
    """Payment rates (payments/day) between ordered node pairs; absent = 0."""

    rates: dict[tuple[Node, Node], float]

    def __post_init__(self) -> None:
        for (s, t), r in self.rates.items():
            if s == t:
                raise ValueError(f"rate on the diagonal for node {s!r}")
            if r < 0:
                raise ValueError(f"negative rate {r} for pair {(s, t)!r}")

    @classmethod
    def uniform(cls, nodes: Iterable[Node], rate: float) -> "RatesMatrix":
        """Same rate for every ordered pair (symmetric by construction)."""
        node_list = list(nodes)
        return cls({(s, t): rate for s in node_list for t in node_list if s != t})

    def rate(self, s: Node, t: Node) -> float:
        return self.rates.get((s, t), 0.0)

    def pairs(self) -> Iterator[tuple[tuple[Node, Node], float]]:
        """Nonzero (source, destination) -> rate entries."""
        for pair, r in self.rates.items():
            if r > 0:
                yield pair, r

    def is_symmetric(self, rel_tol: float = 1e-12) -> bool:
        for (s, t), r in self.rates.items():
            other = self.rates.get((t, s), 0.0)
            if abs(r - other) > rel_tol * max(r, other, 1e-300):
                return False
        return True

    def scaled(self, factor: float) -> "RatesMatrix":
        return RatesMatrix({pair: r * factor for pair, r in self.rates.items()})

    def total(self) -> float:
        return sum(self.rates.values())


def _accumulate_from_source(
    graph: PaymentGraph,
    source: Node,
    weight_of: dict[Node, float] | None,
    edge_flow: dict[DirectedEdge, float],
) -> None:
    # One Brandes pass: BFS for distances, path counts and predecessors,
    # then reverse-order dependency accumulation. weight_of[t] is the pair
    # rate (source, t); None means 1 for every target (plain betweenness).
    dist: dict[Node, int] = {source: 0}
    sigma: dict[Node, float] = {source: 1.0}
    preds: dict[Node, list[Node]] = {source: []}
    order: list[Node] = []
    queue = deque([source])
    while queue:
        v = queue.popleft()
        order.append(v)
        d_next = dist[v] + 1
        for w in graph.neighbors(v):
            if w not in dist:
                dist[w] = d_next
                sigma[w] = 0.0
                preds[w] = []
                queue.append(w)
            if dist[w] == d_next:
                sigma[w] += sigma[v]
                preds[w].append(v)

    delta = {v: 0.0 for v in order}
    for w in reversed(order):
        if w is source:
            continue
        if weight_of is None:
            weight = 1.0
        else:
            weight = weight_of.get(w, 0.0)
        coeff = (weight + delta[w]) / sigma[w]
        for v in preds[w]:
            contribution = sigma[v] * coeff
            edge_flow[(v, w)] += contribution
            delta[v] += contribution


def edge_payment_rates(graph: PaymentGraph, rates: RatesMatrix) -> dict[DirectedEdge, float]:
    """Payment rate carried by every directed edge, from the rates matrix.

    Ordered pairs with no connecting path contribute nothing.
    """
    edge_flow: dict[DirectedEdge, float] = {e: 0.0 for e in graph.directed_edges()}
    by_source: dict[Node, dict[Node, float]] = {}
    for (s, t), r in rates.pairs():
        by_source.setdefault(s, {})[t] = r
    for source, weight_of in by_source.items():
        if source in graph._adjacency:
            _accumulate_from_source(graph, source, weight_of, edge_flow)
    return edge_flow


def edge_payment_rate(
    graph: PaymentGraph, rates: RatesMatrix, edge: DirectedEdge
) -> float:
    """Payment rate over one directed edge; raises if the edge is absent."""
    u, v = edge
    if not graph.has_edge(u, v):
        raise ValueError(f"edge {edge!r} not in graph")
    return edge_payment_rates(graph, rates)[edge]


def edge_betweenness(graph: PaymentGraph) -> EdgeBetweenness:
    """Exact edge betweenness over all ordered pairs of the directed graph."""
    if not graph.nodes:
        raise ValueError("graph has no nodes")
    edge_flow: dict[DirectedEdge, float] = {e: 0.0 for e in graph.directed_edges()}
    for source in graph.nodes:
        _accumulate_from_source(graph, source, None, edge_flow)
    return edge_flow


def channel_direction_probability(
    graph: PaymentGraph, rates: RatesMatrix, channel: DirectedEdge
) -> float:
    """Probability that the next payment through the channel flows a -> b."""
    a, b = channel
    if not graph.has_edge(a, b):
        raise ValueError(f"channel {channel!r} not in graph")
    flows = edge_payment_rates(graph, rates)
    return direction_probability(flows[(a, b)], flows[(b, a)])


@dataclass(frozen=True)
class RateBalanceReport:
    """Worst directional-rate mismatch over all channels of a graph."""

    max_deviation: float
    worst_channel: ChannelKey | None
    tolerance: float

    @property
    def ok(self) -> bool:
        return self.max_deviation < self.tolerance


def verify_symmetric_rate_balance(
    graph: PaymentGraph, rates: RatesMatrix, rel_tol: float = 1e-12
) -> RateBalanceReport:
    """Check that a symmetric rates matrix yields equal directional rates.

    With symmetric pair rates on a bidirectional graph every channel must
    carry the same rate both ways (direction probability exactly 1/2); any
    larger deviation points at a betweenness bug.
    """
    if not rates.is_symmetric():
        raise ValueError("rates matrix is not symmetric")
    flows = edge_payment_rates(graph, rates)
    worst = 0.0
    worst_channel: ChannelKey | None = None
    for key in graph.channels:
        u, v = key
        fwd, bwd = flows[(u, v)], flows[(v, u)]
        scale = max(fwd, bwd)
        if scale == 0:
            continue
        deviation = abs(fwd - bwd) / scale
        if deviation > worst:
            worst = deviation
            worst_channel = key
    return RateBalanceReport(max_deviation=worst, worst_channel=worst_channel, tolerance=rel_tol)
