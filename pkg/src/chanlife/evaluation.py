"""Model evaluation: predicted lifespans vs. repeated-simulation observations.

One network and one rates matrix are generated per configuration; the
simulator then replays a fresh Poisson payment stream per iteration. The
observed lifespan of a channel is its mean first-unbalance step over the
iterations where it unbalanced, compared against the closed-form prediction
as |observed - predicted| / observed. Channels that rarely unbalance or sit
in the top tail of predicted lifespans are excluded as abnormal (and
counted, never silently dropped).
"""

from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass, replace
from multiprocessing import get_context

import numpy as np

from .network import (
    ChannelKey,
    PaymentGraph,
    RatesMatrix,
    edge_payment_rates,
)
from .simulator import ShortestPathSampler, _collect_result, _initial_balances, _replay
from .traffic import MRatesConfig, _sample_stream_arrays, generate_mrates, random_network
from .walk import (
    ChannelSpec,
    DeadChannelError,
    DegenerateChannelError,
    WalkParams,
    direction_probability,
    discretize_funds,
    expected_lifetime,
    expected_steps,
)


@dataclass(frozen=True)
class ChannelPrediction:
    """Closed-form lifespan of one channel, or the reason there is none."""

    channel: ChannelKey
    lambda_out: float  # rate over (lo -> hi) of the canonical key
    lambda_in: float
    p: float | None
    expected_steps: float | None
    expected_days: float | None
    flag: str | None = None  # None | "dead" | "degenerate"


def predict_all_lifespans(
    graph: PaymentGraph, rates: RatesMatrix, omega: int
) -> dict[ChannelKey, ChannelPrediction]:
    """Per-channel expected payments and days until first imbalance.

    Channels with no flow ("dead") or with a side below one payment
    ("degenerate") are flagged rather than dropped.
    """
    flows = edge_payment_rates(graph, rates)
    predictions: dict[ChannelKey, ChannelPrediction] = {}
    for key, (fund_lo, fund_hi) in graph.channels.items():
        lo, hi = key
        lam_out = flows[(lo, hi)]
        lam_in = flows[(hi, lo)]
        try:
            boundaries = discretize_funds(
                ChannelSpec(fund_a=fund_lo, fund_b=fund_hi, payment_size=omega)
            )
            p = direction_probability(lam_out, lam_in)
            steps = expected_steps(WalkParams(p=p, a=boundaries.a, b=boundaries.b))
            days = expected_lifetime(steps, lam_out, lam_in)
        except DeadChannelError:
            predictions[key] = ChannelPrediction(key, lam_out, lam_in, None, None, None, "dead")
            continue
        except DegenerateChannelError:
            predictions[key] = ChannelPrediction(key, lam_out, lam_in, None, None, None, "degenerate")
            continue
        predictions[key] = ChannelPrediction(key, lam_out, lam_in, p, steps, days)
    return predictions


@dataclass(frozen=True)
class EvaluationConfig:
    """Everything one accuracy test needs; a single seed derives the rest."""

    n: int = 50
    edge_prob: float = 0.2
    sparse_coefficient: float = 0.0
    skew: float = 1.0
    base_rate: float = 1.0
    iterations: int = 100
    omega: int = 60_000
    capacity: int = 2_400_000
    abnormality_percentile: float = 0.95
    min_unbalance_fraction: float = 0.2
    horizon_days: float | None = None  # None = 4x the abnormality cutoff
    seed: int = 0
    workers: int = 1

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0.0 < self.abnormality_percentile <= 1.0:
            raise ValueError("abnormality_percentile must be in (0, 1]")
        if not 0.0 <= self.min_unbalance_fraction <= 1.0:
            raise ValueError("min_unbalance_fraction must be in [0, 1]")


@dataclass(frozen=True)
class ChannelError:
    channel: ChannelKey
    predicted_steps: float | None
    predicted_days: float | None
    observed_mean_steps: float | None
    unbalance_fraction: float
    relative_error: float | None
    excluded: bool
    reason: str | None


@dataclass(frozen=True)
class ErrorReport:
    rows: list[ChannelError]
    mean_relative_error: float
    included_count: int
    excluded_count: int
    horizon_days: float
    iterations: int


_WORKER_STATE: dict = {}


def _iteration_worker_init(graph, rates, omega):
    _WORKER_STATE["sampler"] = ShortestPathSampler(graph)
    _WORKER_STATE["balances"] = _initial_balances(_WORKER_STATE["sampler"], graph, None)
    _WORKER_STATE["rates"] = rates
    _WORKER_STATE["omega"] = omega


def _run_iteration(args) -> tuple[list[int], list[int]]:
    stream_seed, tie_seed, horizon = args
    sampler = _WORKER_STATE["sampler"]
    rates = _WORKER_STATE["rates"]
    omega = _WORKER_STATE["omega"]
    rng = np.random.default_rng(stream_seed)
    times, sources, destinations = _sample_stream_arrays(rates, horizon, rng)
    index = sampler.index
    src_idx = [index[s] for s in sources]
    dst_idx = [index[t] for t in destinations]
    out = _replay(
        sampler,
        list(_WORKER_STATE["balances"]),
        times.tolist(),
        src_idx,
        dst_idx,
        omega,
        random.Random(tie_seed).random,
    )
    _, _, successes, first_step, _, _, _ = out
    return first_step, successes


def evaluate(config: EvaluationConfig) -> ErrorReport:
    """Run the full accuracy pipeline for one configuration."""
    seeds = np.random.SeedSequence(config.seed)
    graph_seed, rates_seed, sim_seed = (s.generate_state(1)[0] for s in seeds.spawn(3))
    graph = random_network(config.n, config.edge_prob, seed=int(graph_seed), capacity=config.capacity)
    rates = generate_mrates(
        MRatesConfig(
            n=config.n,
            sparse_coefficient=config.sparse_coefficient,
            skew=config.skew,
            base_rate=config.base_rate,
            seed=int(rates_seed),
        )
    )
    predictions = predict_all_lifespans(graph, rates, config.omega)

    finite_days = sorted(
        pred.expected_days for pred in predictions.values() if pred.expected_days is not None
    )
    if not finite_days:
        raise ValueError("no channel has a finite predicted lifespan; nothing to evaluate")
    cutoff_index = min(
        len(finite_days) - 1,
        max(0, math.ceil(config.abnormality_percentile * len(finite_days)) - 1),
    )
    abnormality_cutoff_days = finite_days[cutoff_index]
    horizon = (
        config.horizon_days
        if config.horizon_days is not None
        else 4.0 * abnormality_cutoff_days
    )

    iteration_seeds = np.random.SeedSequence(int(sim_seed)).spawn(config.iterations)
    job_args = [
        (int(s.generate_state(2)[0]), int(s.generate_state(2)[1]), horizon)
        for s in iteration_seeds
    ]

    sampler = ShortestPathSampler(graph)
    keys = sampler.channel_keys
    n_channels = len(keys)
    unbalance_counts = [0] * n_channels
    step_sums = [0.0] * n_channels

    if config.workers > 1:
        ctx = get_context("fork")
        with ctx.Pool(
            config.workers, initializer=_iteration_worker_init, initargs=(graph, rates, config.omega)
        ) as pool:
            per_iteration = pool.map(_run_iteration, job_args)
    else:
        _iteration_worker_init(graph, rates, config.omega)
        per_iteration = [_run_iteration(a) for a in job_args]

    for first_step, _ in per_iteration:
        for cid in range(n_channels):
            step = first_step[cid]
            if step >= 0:
                unbalance_counts[cid] += 1
                step_sums[cid] += step

    rows: list[ChannelError] = []
    included_errors: list[float] = []
    for cid, key in enumerate(keys):
        pred = predictions[key]
        fraction = unbalance_counts[cid] / config.iterations
        observed = step_sums[cid] / unbalance_counts[cid] if unbalance_counts[cid] else None
        reason: str | None = None
        if pred.flag is not None:
            reason = pred.flag
        elif pred.expected_days > abnormality_cutoff_days:
            reason = "predicted_lifespan_above_percentile"
        elif fraction < config.min_unbalance_fraction or observed is None:
            reason = "rarely_unbalanced"
        elif observed == 0:
            reason = "unbalanced_at_start"
        rel_error = None
        if reason is None:
            rel_error = abs(observed - pred.expected_steps) / observed
            included_errors.append(rel_error)
        rows.append(
            ChannelError(
                channel=key,
                predicted_steps=pred.expected_steps,
                predicted_days=pred.expected_days,
                observed_mean_steps=observed,
                unbalance_fraction=fraction,
                relative_error=rel_error,
                excluded=reason is not None,
                reason=reason,
            )
        )

    mean_error = float(np.mean(included_errors)) if included_errors else float("nan")
    return ErrorReport(
        rows=rows,
        mean_relative_error=mean_error,
        included_count=len(included_errors),
        excluded_count=len(rows) - len(included_errors),
        horizon_days=horizon,
        iterations=config.iterations,
    )


def error_grid(
    base: EvaluationConfig,
    sparse_values: list[float],
    skew_values: list[float],
) -> dict[tuple[float, float], ErrorReport]:
    """Evaluate every (sparse_coefficient, skew) combination of the grid."""
    results: dict[tuple[float, float], ErrorReport] = {}
    for sc in sparse_values:
        for sk in skew_values:
            cfg = replace(base, sparse_coefficient=sc, skew=sk)
            results[(sc, sk)] = evaluate(cfg)
    return results


def write_error_grid_csv(
    results: dict[tuple[float, float], ErrorReport], path: str
) -> None:
    """Mean relative error per (sparse_coefficient, skew) cell."""
    sparse_values = sorted({sc for sc, _ in results})
    skew_values = sorted({sk for _, sk in results})
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sparse_coefficient"] + [f"skew_{sk:g}" for sk in skew_values])
        for sc in sparse_values:
            row: list[object] = [f"{sc:g}"]
            for sk in skew_values:
                report = results.get((sc, sk))
                row.append("" if report is None else f"{report.mean_relative_error:.6f}")
            writer.writerow(row)


def write_error_report_csv(report: ErrorReport, path: str) -> None:
    """Per-channel detail: prediction, observation, error, exclusion reason."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "node_a",
                "node_b",
                "predicted_steps_payments",
                "predicted_lifespan_days",
                "observed_mean_steps_payments",
                "unbalance_fraction",
                "relative_error",
                "excluded",
                "reason",
            ]
        )
        for row in report.rows:
            writer.writerow(
                [
                    row.channel[0],
                    row.channel[1],
                    "" if row.predicted_steps is None else f"{row.predicted_steps:.6f}",
                    "" if row.predicted_days is None else f"{row.predicted_days:.6f}",
                    "" if row.observed_mean_steps is None else f"{row.observed_mean_steps:.6f}",
                    f"{row.unbalance_fraction:.4f}",
                    "" if row.relative_error is None else f"{row.relative_error:.6f}",
                    int(row.excluded),
                    row.reason or "",
                ]
            )
