"""Discrete-event payment routing over a channel graph.

Payments replay in time order. Each payment picks one hop-count-shortest
path uniformly at random among all shortest paths (sampled through
path-count weights, so ties never need enumeration) and either moves omega
along every hop or fails without touching any balance. There is no retry on
an alternative path. A channel's first unbalance is the first instant its
smaller directional fund drops below omega.
"""

from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass
from typing import Sequence

from .network import ChannelKey, DirectedEdge, Node, PaymentGraph, channel_key, edge_betweenness
from .traffic import PaymentEvent


class NoUnbalanceError(RuntimeError):
    """The observed channel never became unbalanced."""


@dataclass
class ChannelState:
    """Live balances and lifetime counters of one channel.

    fund_a / fund_b follow the canonical key order. successes counts the
    payments that actually crossed the channel, which is exactly the
    random-walk step count.
    """

    fund_a: int
    fund_b: int
    capacity: int
    attempts: int = 0
    successes: int = 0
    first_unbalance_step: int | None = None
    first_unbalance_time: float | None = None


@dataclass(frozen=True)
class SimResult:
    channels: dict[ChannelKey, ChannelState]
    network_attempts: int
    network_successes: int

    @property
    def success_rate(self) -> float | None:
        if self.network_attempts == 0:
            return None
        return self.network_successes / self.network_attempts


@dataclass(frozen=True)
class RouteResult:
    success: bool
    path: list[Node] | None


class ShortestPathSampler:
    """Uniform sampling over all hop-count-shortest paths of a graph.

    Per destination, a BFS labels every node with its distance and the
    number of shortest paths onward to the destination; sampling then walks
    node by node, picking each next hop with probability proportional to how
    many shortest paths continue through it. Tables build lazily per
    destination and are reused across payments.
    """

    def __init__(self, graph: PaymentGraph):
        self.graph = graph
        self.index = {node: i for i, node in enumerate(graph.nodes)}
        self.node_list = list(graph.nodes)
        n = len(self.node_list)
        self.adjacency: list[list[int]] = [[] for _ in range(n)]
        self.edge_id: list[dict[int, int]] = [{} for _ in range(n)]
        self.channel_keys: list[ChannelKey] = []
        for cid, (u, v) in enumerate(graph.channels):
            ui, vi = self.index[u], self.index[v]
            self.adjacency[ui].append(vi)
            self.adjacency[vi].append(ui)
            # 2*cid routes lo -> hi, 2*cid + 1 the reverse; eid ^ 1 flips.
            self.edge_id[ui][vi] = 2 * cid
            self.edge_id[vi][ui] = 2 * cid + 1
            self.channel_keys.append((u, v))
        self._toward: dict[int, dict[int, tuple[list[int], list[int], list[float], float]]] = {}
        self._dist: dict[int, list[int]] = {}
        self._counts: dict[int, list[int]] = {}

    def _build_target(self, t: int) -> None:
        n = len(self.adjacency)
        dist = [-1] * n
        dist[t] = 0
        frontier = [t]
        layers = [frontier]
        while frontier:
            nxt = []
            for v in frontier:
                dv = dist[v]
                for w in self.adjacency[v]:
                    if dist[w] < 0:
                        dist[w] = dv + 1
                        nxt.append(w)
            frontier = nxt
            if nxt:
                layers.append(nxt)

        paths_onward = [0] * n
        paths_onward[t] = 1
        toward: dict[int, tuple[list[int], list[int], list[float], float]] = {}
        for layer in layers[1:]:
            for v in layer:
                closer = dist[v] - 1
                hops: list[int] = []
                eids: list[int] = []
                cumulative: list[float] = []
                total = 0
                edge_row = self.edge_id[v]
                for w in self.adjacency[v]:
                    if dist[w] == closer:
                        total += paths_onward[w]
                        hops.append(w)
                        eids.append(edge_row[w])
                        cumulative.append(float(total))
                paths_onward[v] = total
                toward[v] = (hops, eids, cumulative, float(total))
        self._dist[t] = dist
        self._toward[t] = toward
        self._counts[t] = paths_onward

    def distance(self, s: Node, t: Node) -> int:
        """Hop distance, -1 when unreachable."""
        ti = self.index[t]
        if ti not in self._dist:
            self._build_target(ti)
        return self._dist[ti][self.index[s]]

    def path_count(self, s: Node, t: Node) -> int:
        """Number of distinct shortest paths from s to t (0 if unreachable)."""
        ti = self.index[t]
        if ti not in self._dist:
            self._build_target(ti)
        return self._counts[ti][self.index[s]]

    def sample_indexed(
        self, si: int, ti: int, rand
    ) -> tuple[list[int], list[int]] | None:
        """Sample (node index path, edge id path); None when unreachable."""
        if ti not in self._toward:
            self._build_target(ti)
        if si != ti and self._dist[ti][si] < 0:
            return None
        toward = self._toward[ti]
        nodes = [si]
        eids: list[int] = []
        v = si
        while v != ti:
            hops, hop_eids, cumulative, total = toward[v]
            if len(hops) == 1:
                i = 0
            else:
                r = rand() * total
                i = 0
                while cumulative[i] <= r:
                    i += 1
            v = hops[i]
            nodes.append(v)
            eids.append(hop_eids[i])
        return nodes, eids

    def sample(self, s: Node, t: Node, rand) -> list[Node] | None:
        """Sample a uniformly random shortest path as a list of node ids."""
        picked = self.sample_indexed(self.index[s], self.index[t], rand)
        if picked is None:
            return None
        return [self.node_list[i] for i in picked[0]]

    def enumerate_paths(self, s: Node, t: Node, limit: int = 10_000) -> list[list[Node]]:
        """All shortest paths (for verification); stops at limit paths."""
        ti = self.index[t]
        if ti not in self._dist:
            self._build_target(ti)
        dist = self._dist[ti]
        si = self.index[s]
        if si != ti and dist[si] < 0:
            return []
        paths: list[list[Node]] = []

        def walk(v: int, acc: list[int]) -> None:
            if len(paths) >= limit:
                return
            if v == ti:
                paths.append([self.node_list[i] for i in acc])
                return
            for w in self.adjacency[v]:
                if dist[w] == dist[v] - 1:
                    acc.append(w)
                    walk(w, acc)
                    acc.pop()

        walk(si, [si])
        return paths


def initial_channel_states(
    graph: PaymentGraph,
    initial_funds: dict[ChannelKey, tuple[int, int]] | None = None,
) -> dict[ChannelKey, ChannelState]:
    """Fresh per-channel states from the graph funds (with optional overrides)."""
    states = {}
    for key, (fund_a, fund_b) in graph.channels.items():
        if initial_funds and key in initial_funds:
            fund_a, fund_b = initial_funds[key]
        states[key] = ChannelState(fund_a=fund_a, fund_b=fund_b, capacity=fund_a + fund_b)
    return states


def route_payment(
    graph: PaymentGraph,
    states: dict[ChannelKey, ChannelState],
    event: PaymentEvent,
    rng: random.Random,
    sampler: ShortestPathSampler | None = None,
) -> RouteResult:
    """Route one payment; moves balances on success, leaves them on failure.

    Pass a prebuilt sampler when routing many payments over the same graph.
    """
    if sampler is None:
        sampler = ShortestPathSampler(graph)
    omega = event.amount
    path = sampler.sample(event.source, event.destination, rng.random)
    if path is None:
        return RouteResult(success=False, path=None)

    hops = list(zip(path[:-1], path[1:]))
    keys = [channel_key(u, v) for u, v in hops]
    ok = True
    for (u, v), key in zip(hops, keys):
        state = states[key]
        states[key].attempts += 1
        sender_fund = state.fund_a if key[0] == u else state.fund_b
        if sender_fund < omega:
            ok = False
    if not ok:
        return RouteResult(success=False, path=path)

    for (u, v), key in zip(hops, keys):
        state = states[key]
        if key[0] == u:
            state.fund_a -= omega
            state.fund_b += omega
        else:
            state.fund_b -= omega
            state.fund_a += omega
        state.successes += 1
        if state.first_unbalance_step is None and min(state.fund_a, state.fund_b) < omega:
            state.first_unbalance_step = state.successes
            state.first_unbalance_time = event.time
    return RouteResult(success=True, path=path)


def _replay(
    sampler: ShortestPathSampler,
    initial_balances: list[int],
    times: Sequence[float],
    sources: Sequence[int],
    destinations: Sequence[int],
    omega: int,
    rand,
) -> tuple[list[int], list[int], list[int], list[int], list[float], int, int]:
    # Hot loop shared by all bulk entry points; everything indexed by ints.
    n_channels = len(sampler.channel_keys)
    balances = list(initial_balances)
    attempts = [0] * n_channels
    successes = [0] * n_channels
    first_step = [-1] * n_channels
    first_time = [0.0] * n_channels
    for cid in range(n_channels):
        if balances[2 * cid] < omega or balances[2 * cid + 1] < omega:
            first_step[cid] = 0
    net_attempts = 0
    net_successes = 0

    sample_indexed = sampler.sample_indexed
    for tm, s, t in zip(times, sources, destinations):
        net_attempts += 1
        picked = sample_indexed(s, t, rand)
        if picked is None:
            continue
        eids = picked[1]
        ok = True
        for e in eids:
            attempts[e >> 1] += 1
            if balances[e] < omega:
                ok = False
        if not ok:
            continue
        for e in eids:
            r = e ^ 1
            fwd = balances[e] - omega
            rev = balances[r] + omega
            balances[e] = fwd
            balances[r] = rev
            cid = e >> 1
            steps = successes[cid] + 1
            successes[cid] = steps
            if first_step[cid] < 0 and (fwd < omega or rev < omega):
                first_step[cid] = steps
                first_time[cid] = tm
        net_successes += 1
    return balances, attempts, successes, first_step, first_time, net_attempts, net_successes


def _initial_balances(
    sampler: ShortestPathSampler,
    graph: PaymentGraph,
    initial_funds: dict[ChannelKey, tuple[int, int]] | None,
) -> list[int]:
    balances = [0] * (2 * len(sampler.channel_keys))
    for cid, key in enumerate(sampler.channel_keys):
        fund_lo, fund_hi = graph.channels[key]
        if initial_funds and key in initial_funds:
            fund_lo, fund_hi = initial_funds[key]
        balances[2 * cid] = fund_lo
        balances[2 * cid + 1] = fund_hi
    return balances


def _collect_result(
    sampler: ShortestPathSampler,
    replay_output: tuple,
) -> SimResult:
    balances, attempts, successes, first_step, first_time, net_att, net_suc = replay_output
    channels: dict[ChannelKey, ChannelState] = {}
    for cid, key in enumerate(sampler.channel_keys):
        fund_lo = balances[2 * cid]
        fund_hi = balances[2 * cid + 1]
        channels[key] = ChannelState(
            fund_a=fund_lo,
            fund_b=fund_hi,
            capacity=fund_lo + fund_hi,
            attempts=attempts[cid],
            successes=successes[cid],
            first_unbalance_step=first_step[cid] if first_step[cid] >= 0 else None,
            first_unbalance_time=first_time[cid] if first_step[cid] >= 0 else None,
        )
    return SimResult(channels=channels, network_attempts=net_att, network_successes=net_suc)


def run_simulation(
    graph: PaymentGraph,
    events: Sequence[PaymentEvent],
    omega: int,
    seed: int,
    initial_funds: dict[ChannelKey, tuple[int, int]] | None = None,
) -> SimResult:
    """Replay a payment stream and record each channel's first unbalance.

    The seed drives only the tie-breaking among equal-length shortest paths;
    identical (graph, events, seed) give identical results.
    """
    sampler = ShortestPathSampler(graph)
    index = sampler.index
    times = [ev.time for ev in events]
    sources = [index[ev.source] for ev in events]
    destinations = [index[ev.destination] for ev in events]
    for ev in events:
        if ev.amount != omega:
            raise ValueError(f"event amount {ev.amount} != omega {omega}")
    rand = random.Random(seed).random
    out = _replay(
        sampler,
        _initial_balances(sampler, graph, initial_funds),
        times,
        sources,
        destinations,
        omega,
        rand,
    )
    return _collect_result(sampler, out)


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SingleChannelResult:
    """Post-unbalance failure statistics of a lone channel."""

    failure_rate_after_unbalance: float | None
    first_unbalance_step: int
    attempts_after_unbalance: int
    failures_after_unbalance: int


def single_channel_experiment(
    p: float, capacity: int, omega: int, n_payments: int, seed: int
) -> SingleChannelResult:
    """Push Bernoulli(p)-directed payments through one balanced channel.

    Returns the failure rate among the payments attempted after the first
    unbalance; raises NoUnbalanceError when the channel never unbalances.
    """
    if not 0.0 < p < 1.0:
        raise ValueError("p must be in (0, 1)")
    if n_payments < 0:
        raise ValueError("n_payments must be non-negative")
    fund_a = capacity // 2
    fund_b = capacity - fund_a
    unbalanced_at: int | None = 0 if min(fund_a, fund_b) < omega else None
    attempts_after = 0
    failures_after = 0
    rand = random.Random(seed).random
    for step in range(1, n_payments + 1):
        if unbalanced_at is not None:
            attempts_after += 1
        if rand() < p:
            if fund_a >= omega:
                fund_a -= omega
                fund_b += omega
            elif unbalanced_at is not None:
                failures_after += 1
        else:
            if fund_b >= omega:
                fund_b -= omega
                fund_a += omega
            elif unbalanced_at is not None:
                failures_after += 1
        if unbalanced_at is None and min(fund_a, fund_b) < omega:
            unbalanced_at = step
    if unbalanced_at is None:
        raise NoUnbalanceError(
            f"no unbalance observed within {n_payments} payments"
        )
    rate = failures_after / attempts_after if attempts_after else None
    return SingleChannelResult(
        failure_rate_after_unbalance=rate,
        first_unbalance_step=unbalanced_at,
        attempts_after_unbalance=attempts_after,
        failures_after_unbalance=failures_after,
    )


@dataclass(frozen=True)
class RandomSelection:
    fraction: float


@dataclass(frozen=True)
class TopBetweennessSelection:
    fraction: float


@dataclass(frozen=True)
class WindowSelection:
    start_rank: int
    width: int


Selection = RandomSelection | TopBetweennessSelection | WindowSelection


def channels_by_centrality(graph: PaymentGraph) -> list[ChannelKey]:
    """Channels sorted by edge betweenness, most central first."""
    ebc = edge_betweenness(graph)
    return sorted(graph.channels, key=lambda key: (-ebc[key], key))


def unbalance_experiment(
    graph: PaymentGraph,
    selection: Selection,
    n_payments: int,
    seed: int,
    omega: int = 60_000,
) -> float:
    """Force a set of channels fully one-sided, then measure success rate.

    The drained side of each selected channel is chosen uniformly at random;
    payments go between uniformly random node pairs.
    """
    rng = random.Random(seed)
    ranked = channels_by_centrality(graph)
    n_channels = len(ranked)

    if isinstance(selection, RandomSelection):
        if not 0.0 <= selection.fraction <= 1.0:
            raise ValueError("fraction must be in [0, 1]")
        count = round(selection.fraction * n_channels)
        chosen = rng.sample(ranked, count)
    elif isinstance(selection, TopBetweennessSelection):
        if not 0.0 <= selection.fraction <= 1.0:
            raise ValueError("fraction must be in [0, 1]")
        chosen = ranked[: round(selection.fraction * n_channels)]
    elif isinstance(selection, WindowSelection):
        if selection.start_rank < 0 or selection.width < 0:
            raise ValueError("window bounds must be non-negative")
        if selection.start_rank + selection.width > n_channels:
            raise ValueError("window exceeds channel count")
        chosen = ranked[selection.start_rank : selection.start_rank + selection.width]
    else:
        raise TypeError(f"unknown selection {selection!r}")

    forced: dict[ChannelKey, tuple[int, int]] = {}
    for key in chosen:
        cap = graph.capacity(key)
        forced[key] = (cap, 0) if rng.random() < 0.5 else (0, cap)

    sampler = ShortestPathSampler(graph)
    n = len(graph.nodes)
    sources = []
    destinations = []
    for _ in range(n_payments):
        s = rng.randrange(n)
        t = rng.randrange(n - 1)
        if t >= s:
            t += 1
        sources.append(s)
        destinations.append(t)
    out = _replay(
        sampler,
        _initial_balances(sampler, graph, forced),
        [0.0] * n_payments,
        sources,
        destinations,
        omega,
        rng.random,
    )
    result = _collect_result(sampler, out)
    return result.network_successes / max(result.network_attempts, 1)


# ---------------------------------------------------------------------------
# Result serialization
# ---------------------------------------------------------------------------

def write_channel_results(result: SimResult, path: str, graph: PaymentGraph | None = None) -> None:
    """Per-channel CSV: unbalance step/time, attempts, successes, balances."""
    labels = graph.channel_labels if graph is not None and graph.channel_labels else {}
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "channel_id",
                "node_a",
                "node_b",
                "first_unbalance_step_payments",
                "first_unbalance_time_days",
                "attempts",
                "successes",
                "fund_a_sat",
                "fund_b_sat",
                "capacity_sat",
            ]
        )
        for key in sorted(result.channels, key=repr):
            state = result.channels[key]
            writer.writerow(
                [
                    labels.get(key, f"{key[0]}~{key[1]}"),
                    key[0],
                    key[1],
                    "" if state.first_unbalance_step is None else state.first_unbalance_step,
                    "" if state.first_unbalance_time is None else repr(state.first_unbalance_time),
                    state.attempts,
                    state.successes,
                    state.fund_a,
                    state.fund_b,
                    state.capacity,
                ]
            )


def write_run_summary(result: SimResult, path: str, extra: dict | None = None) -> None:
    """One-record JSON summary of a simulation run."""
    unbalanced = sum(
        1 for st in result.channels.values() if st.first_unbalance_step is not None
    )
    record = {
        "network_attempts": result.network_attempts,
        "network_successes": result.network_successes,
        "success_rate": result.success_rate,
        "channels": len(result.channels),
        "channels_unbalanced": unbalanced,
    }
    if extra:
        record.update(extra)
    with open(path, "w") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")
