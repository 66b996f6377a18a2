"""Command-line entry point wiring the library into reproducible runs.

Every run resolves its parameters (config file < flags), writes the CSV
outputs into --out, and drops a manifest.json holding the fully resolved
configuration, the seed and the package version. Re-running with
--config manifest.json reproduces the outputs byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import secrets
import statistics
import sys
from dataclasses import replace

from . import __version__
from .evaluation import (
    EvaluationConfig,
    error_grid,
    write_error_grid_csv,
    write_error_report_csv,
)
from .network import RatesMatrix
from .simulator import (
    RandomSelection,
    TopBetweennessSelection,
    WindowSelection,
    run_simulation,
    single_channel_experiment,
    unbalance_experiment,
    write_channel_results,
    write_run_summary,
)
from .snapshot import (
    analyze_snapshot,
    load_snapshot,
    write_analysis_csv,
    write_batches_csv,
    write_histogram_csv,
    write_stats_summary,
)
from .traffic import (
    MRatesConfig,
    generate_mrates,
    generate_payment_stream,
    random_network,
    read_event_log,
    write_event_log,
)
from .walk import (
    ChannelSpec,
    WalkParams,
    discretize_funds,
    expected_lifetime,
    expected_steps,
)

SIMULATION_COMMANDS = {"simulate", "single-channel", "unbalance", "evaluate"}


def _load_config_file(path: str) -> dict[str, str]:
    """key=value lines (# comments) or a manifest.json from a previous run."""
    with open(path) as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        manifest = json.loads(text)
        params = manifest.get("params", manifest)
        values = {}
        for key, value in params.items():
            if value is None or key in ("command", "version"):
                continue
            if isinstance(value, list):
                value = ",".join(str(item) for item in value)
            values[key] = str(value)
        return values
    values = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{line_no}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def _config_flags(path: str) -> list[str]:
    flags: list[str] = []
    for key, value in _load_config_file(path).items():
        if key == "config":
            continue
        flags.append("--" + key.replace("_", "-"))
        flags.append(value)
    return flags


def _float_list(raw: str) -> list[float]:
    return [float(part) for part in raw.split(",") if part.strip() != ""]


def _int_list(raw: str) -> list[int]:
    return [int(float(part)) for part in raw.split(",") if part.strip() != ""]


def _resolve_seed(args: argparse.Namespace) -> None:
    if getattr(args, "seed", None) is None:
        if args.command in SIMULATION_COMMANDS:
            args.seed = secrets.randbelow(2**31)
        else:
            args.seed = 0


def _write_manifest(args: argparse.Namespace, out_dir: str) -> None:
    skip = {"config", "out", "func"}
    params = {
        key: value
        for key, value in sorted(vars(args).items())
        if key not in skip and not key.startswith("_") and not callable(value)
    }
    params.pop("command", None)
    manifest = {
        "command": args.command,
        "params": params,
        "version": __version__,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _ensure_out(args: argparse.Namespace) -> str:
    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)
    return out_dir


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_predict(args, parser) -> int:
    if args.p is None:
        parser.error("predict requires --p")
    if args.a is not None and args.b is not None:
        a, b = args.a, args.b
    elif args.fund_a is not None and args.fund_b is not None and args.omega is not None:
        walk = discretize_funds(
            ChannelSpec(fund_a=args.fund_a, fund_b=args.fund_b, payment_size=args.omega)
        )
        a, b = walk.a, walk.b
    else:
        parser.error("predict needs either --a/--b or --fund-a/--fund-b/--omega")
    try:
        steps = expected_steps(WalkParams(p=args.p, a=a, b=b))
    except ValueError as exc:
        parser.error(str(exc))
    print(f"expected_payments: {steps:.6f}")
    if args.rate_ab is not None and args.rate_ba is not None:
        days = expected_lifetime(steps, args.rate_ab, args.rate_ba)
        print(f"expected_days: {days:.6f}")
    return 0


def cmd_simulate(args, parser) -> int:
    out_dir = _ensure_out(args)
    if args.file:
        graph = load_snapshot(args.file)
    else:
        graph = random_network(args.n, args.edge_prob, seed=args.seed, capacity=args.capacity)
    if args.events:
        events = read_event_log(args.events)
    else:
        rates = generate_mrates(
            MRatesConfig(
                n=len(graph.nodes),
                sparse_coefficient=args.sc,
                skew=args.sk,
                base_rate=args.base_rate,
                seed=args.seed,
            )
        )
        if args.file:
            # generated node ids are indices; remap onto snapshot node ids
            nodes = graph.nodes
            rates = RatesMatrix(
                {(nodes[s], nodes[t]): r for (s, t), r in rates.rates.items()}
            )
        events = generate_payment_stream(rates, args.horizon, args.omega, seed=args.seed)
        write_event_log(events, os.path.join(out_dir, "events.csv"))
    result = run_simulation(graph, events, args.omega, seed=args.seed)
    write_channel_results(result, os.path.join(out_dir, "channels.csv"), graph)
    write_run_summary(result, os.path.join(out_dir, "summary.json"), {"events": len(events)})
    _write_manifest(args, out_dir)
    rate = result.success_rate
    print(f"events: {len(events)}  success_rate: {'n/a' if rate is None else f'{rate:.4f}'}")
    print(f"outputs in {out_dir}")
    return 0


def cmd_single_channel(args, parser) -> int:
    out_dir = _ensure_out(args)
    result = single_channel_experiment(
        p=args.p,
        capacity=args.capacity,
        omega=args.omega,
        n_payments=args.n_payments,
        seed=args.seed,
    )
    with open(os.path.join(out_dir, "single_channel.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "p",
                "capacity_sat",
                "omega_sat",
                "n_payments",
                "first_unbalance_step_payments",
                "attempts_after_unbalance",
                "failures_after_unbalance",
                "failure_rate_after_unbalance",
            ]
        )
        writer.writerow(
            [
                args.p,
                args.capacity,
                args.omega,
                args.n_payments,
                result.first_unbalance_step,
                result.attempts_after_unbalance,
                result.failures_after_unbalance,
                "" if result.failure_rate_after_unbalance is None
                else f"{result.failure_rate_after_unbalance:.6f}",
            ]
        )
    _write_manifest(args, out_dir)
    print(
        f"first unbalance at payment {result.first_unbalance_step}; "
        f"failure rate after: {result.failure_rate_after_unbalance}"
    )
    return 0


def cmd_unbalance(args, parser) -> int:
    out_dir = _ensure_out(args)
    if args.file:
        graph = load_snapshot(args.file)
    else:
        graph = random_network(args.n, args.edge_prob, seed=args.seed, capacity=args.capacity)
    if args.strategy == "random":
        selection = RandomSelection(args.fraction)
    elif args.strategy == "top":
        selection = TopBetweennessSelection(args.fraction)
    elif args.strategy == "window":
        if args.window_start is None or args.window_width is None:
            parser.error("window strategy needs --window-start and --window-width")
        selection = WindowSelection(args.window_start, args.window_width)
    else:
        parser.error(f"unknown strategy {args.strategy!r}")
    rates = [
        unbalance_experiment(
            graph, selection, args.n_payments, seed=args.seed + rep, omega=args.omega
        )
        for rep in range(args.repeat)
    ]
    mean_rate = statistics.mean(rates)
    with open(os.path.join(out_dir, "unbalance.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["strategy", "fraction", "window_start", "window_width", "repeat", "success_rate"])
        writer.writerow(
            [
                args.strategy,
                "" if args.strategy == "window" else args.fraction,
                args.window_start if args.strategy == "window" else "",
                args.window_width if args.strategy == "window" else "",
                args.repeat,
                f"{mean_rate:.6f}",
            ]
        )
    _write_manifest(args, out_dir)
    print(f"success_rate: {mean_rate:.4f} (over {args.repeat} run(s))")
    return 0


def cmd_evaluate(args, parser) -> int:
    out_dir = _ensure_out(args)
    base = EvaluationConfig(
        n=args.n,
        edge_prob=args.edge_prob,
        base_rate=args.base_rate,
        iterations=args.iterations,
        omega=args.omega,
        capacity=args.capacity,
        abnormality_percentile=args.abnormality_percentile,
        min_unbalance_fraction=args.min_unbalance_fraction,
        horizon_days=args.horizon if args.horizon > 0 else None,
        seed=args.seed,
        workers=args.workers,
    )
    results = error_grid(base, args.sc_values, args.sk_values)
    write_error_grid_csv(results, os.path.join(out_dir, "error_grid.csv"))
    for (sc, sk), report in results.items():
        detail = os.path.join(out_dir, f"channels_sc{sc:g}_sk{sk:g}.csv")
        write_error_report_csv(report, detail)
        print(
            f"SC={sc:g} SK={sk:g}: mean relative error {report.mean_relative_error:.4f} "
            f"({report.included_count} channels, {report.excluded_count} excluded)"
        )
    _write_manifest(args, out_dir)
    print(f"outputs in {out_dir}")
    return 0


def cmd_snapshot(args, parser) -> int:
    out_dir = _ensure_out(args)
    graph = load_snapshot(args.file)
    analysis = analyze_snapshot(
        graph, rate=args.r, omega=args.omega, central_fraction=args.central_fraction
    )
    write_analysis_csv(analysis, os.path.join(out_dir, "channel_lifespans.csv"))
    write_stats_summary(analysis, os.path.join(out_dir, "lifespan_stats.csv"))
    write_histogram_csv(analysis, os.path.join(out_dir, "lifespan_histogram.csv"), bins=args.bins)
    batch_size = args.batch_size or max(1, len(analysis.channels) // 20)
    write_batches_csv(analysis, os.path.join(out_dir, "betweenness_batches.csv"), batch_size)
    _write_manifest(args, out_dir)
    stats = analysis.all_stats
    central = analysis.central_stats
    print(f"channels: {stats.count} (+{analysis.infinite_count} with no flow)")
    print(f"lifespan days  all: avg={stats.average:.1f} std={stats.std:.1f} median={stats.median:.1f}")
    print(
        f"lifespan days  top {analysis.central_fraction:.0%}: "
        f"avg={central.average:.1f} std={central.std:.1f} median={central.median:.1f}"
    )
    print(f"outputs in {out_dir}")
    return 0


def cmd_sweep(args, parser) -> int:
    out_dir = _ensure_out(args)
    path = os.path.join(out_dir, f"sweep_{args.kind.replace('-', '_')}.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if args.kind == "p":
            writer.writerow(["p", "capacity_sat", "expected_payments"])
            for capacity in args.capacities:
                half = capacity // 2
                walk = discretize_funds(ChannelSpec(half, capacity - half, args.omega))
                p = args.p_step
                while p < 1.0 - args.p_step / 2:
                    steps = expected_steps(WalkParams(p=p, a=walk.a, b=walk.b))
                    writer.writerow([f"{p:.6f}", capacity, f"{steps:.6f}"])
                    p += args.p_step
        elif args.kind == "capacity":
            writer.writerow(["capacity_sat", "p", "expected_payments"])
            for capacity in args.capacities:
                half = capacity // 2
                walk = discretize_funds(ChannelSpec(half, capacity - half, args.omega))
                for p in args.p_values:
                    steps = expected_steps(WalkParams(p=p, a=walk.a, b=walk.b))
                    writer.writerow([capacity, f"{p:.6f}", f"{steps:.6f}"])
        elif args.kind == "peer-fund":
            writer.writerow(["own_fund_sat", "peer_fund_sat", "p", "expected_payments"])
            for peer_fund in args.capacities:
                for p in args.p_values:
                    walk = discretize_funds(
                        ChannelSpec(args.fixed_fund, peer_fund, args.omega)
                    )
                    steps = expected_steps(WalkParams(p=p, a=walk.a, b=walk.b))
                    writer.writerow(
                        [args.fixed_fund, peer_fund, f"{p:.6f}", f"{steps:.6f}"]
                    )
        else:
            parser.error(f"unknown sweep kind {args.kind!r}")
    _write_manifest(args, out_dir)
    print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chanlife",
        description="Payment-channel lifespan prediction and routing simulation",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, seed_help="random seed (auto-generated and recorded if omitted)"):
        sp.add_argument("--config", help="key=value config file or a previous manifest.json")
        sp.add_argument("--out", default="out", help="output directory (default: out)")
        sp.add_argument("--seed", type=int, default=None, help=seed_help)

    predict = sub.add_parser("predict", help="closed-form lifespan of one channel")
    predict.add_argument("--p", type=float, default=None, help="direction probability in (0,1)")
    predict.add_argument("--a", type=int, default=None, help="positive boundary in payments")
    predict.add_argument("--b", type=int, default=None, help="negative boundary in payments")
    predict.add_argument("--fund-a", type=int, default=None, help="side-A fund (sat)")
    predict.add_argument("--fund-b", type=int, default=None, help="side-B fund (sat)")
    predict.add_argument("--omega", type=int, default=None, help="payment size (sat)")
    predict.add_argument("--rate-ab", type=float, default=None, help="rate A->B (payments/day)")
    predict.add_argument("--rate-ba", type=float, default=None, help="rate B->A (payments/day)")
    predict.set_defaults(func=cmd_predict)

    simulate = sub.add_parser("simulate", help="replay a payment stream over a network")
    common(simulate)
    simulate.add_argument("--file", default=None, help="snapshot CSV instead of a random network")
    simulate.add_argument("--events", default=None, help="replay an existing events.csv")
    simulate.add_argument("--n", type=int, default=50, help="nodes of the random network")
    simulate.add_argument("--edge-prob", type=float, default=0.2, help="channel probability")
    simulate.add_argument("--capacity", type=int, default=2_400_000, help="channel capacity (sat)")
    simulate.add_argument("--sc", type=float, default=0.0, help="rates sparseness in [0,1]")
    simulate.add_argument("--sk", type=float, default=1.0, help="rates skew >= 1")
    simulate.add_argument("--base-rate", type=float, default=1.0, help="pair rate (payments/day)")
    simulate.add_argument("--horizon", type=float, default=30.0, help="stream length (days)")
    simulate.add_argument("--omega", type=int, default=60_000, help="payment size (sat)")
    simulate.set_defaults(func=cmd_simulate)

    single = sub.add_parser("single-channel", help="post-unbalance failure rate of one channel")
    common(single)
    single.add_argument("--p", type=float, required=True, help="payment direction probability")
    single.add_argument("--capacity", type=int, default=2_400_000, help="channel capacity (sat)")
    single.add_argument("--omega", type=int, default=60_000, help="payment size (sat)")
    single.add_argument("--n-payments", type=int, default=5000, help="payments to route")
    single.set_defaults(func=cmd_single_channel)

    unbalance = sub.add_parser("unbalance", help="success rate with forced-unbalanced channels")
    common(unbalance)
    unbalance.add_argument("--strategy", choices=["random", "top", "window"], default="random")
    unbalance.add_argument("--fraction", type=float, default=0.15, help="share of channels to drain")
    unbalance.add_argument("--window-start", type=int, default=None, help="centrality rank of window start")
    unbalance.add_argument("--window-width", type=int, default=None, help="window size in channels")
    unbalance.add_argument("--n-payments", type=int, default=5000, help="payments to route")
    unbalance.add_argument("--repeat", type=int, default=1, help="seeds to average over")
    unbalance.add_argument("--file", default=None, help="snapshot CSV instead of a random network")
    unbalance.add_argument("--n", type=int, default=50, help="nodes of the random network")
    unbalance.add_argument("--edge-prob", type=float, default=0.1, help="channel probability")
    unbalance.add_argument("--capacity", type=int, default=2_400_000, help="channel capacity (sat)")
    unbalance.add_argument("--omega", type=int, default=60_000, help="payment size (sat)")
    unbalance.set_defaults(func=cmd_unbalance)

    evaluate_cmd = sub.add_parser("evaluate", help="prediction accuracy over an SC x SK grid")
    common(evaluate_cmd)
    evaluate_cmd.add_argument("--n", type=int, default=50)
    evaluate_cmd.add_argument("--edge-prob", type=float, default=0.2)
    evaluate_cmd.add_argument("--sc-values", type=_float_list, default=[0.0, 0.3, 0.5, 0.9])
    evaluate_cmd.add_argument("--sk-values", type=_float_list, default=[1.0, 4.0, 6.0, 10.0])
    evaluate_cmd.add_argument("--base-rate", type=float, default=1.0)
    evaluate_cmd.add_argument("--iterations", type=int, default=100)
    evaluate_cmd.add_argument("--omega", type=int, default=60_000)
    evaluate_cmd.add_argument("--capacity", type=int, default=600_000)
    evaluate_cmd.add_argument("--abnormality-percentile", type=float, default=0.95)
    evaluate_cmd.add_argument("--min-unbalance-fraction", type=float, default=0.2)
    evaluate_cmd.add_argument("--horizon", type=float, default=0.0, help="days; 0 = automatic")
    evaluate_cmd.add_argument("--workers", type=int, default=1, help="parallel iteration workers")
    evaluate_cmd.set_defaults(func=cmd_evaluate)

    snapshot = sub.add_parser("snapshot", help="lifespan analysis of a snapshot CSV")
    common(snapshot, seed_help="unused; recorded for the manifest")
    snapshot.add_argument("--file", required=True, help="snapshot CSV")
    snapshot.add_argument("--r", type=float, default=0.0022, help="pair payment rate (payments/day)")
    snapshot.add_argument("--omega", type=int, default=60_000, help="payment size (sat)")
    snapshot.add_argument("--central-fraction", type=float, default=0.14)
    snapshot.add_argument("--bins", type=int, default=50, help="histogram bins")
    snapshot.add_argument("--batch-size", type=int, default=0, help="0 = channels/20")
    snapshot.set_defaults(func=cmd_snapshot)

    sweep = sub.add_parser("sweep", help="plot-ready curves of the closed-form model")
    common(sweep, seed_help="unused; recorded for the manifest")
    sweep.add_argument("--kind", choices=["p", "capacity", "peer-fund"], default="p")
    sweep.add_argument("--omega", type=int, default=60_000)
    sweep.add_argument(
        "--capacities",
        type=_int_list,
        default=[1_200_000, 2_400_000, 4_800_000],
        help="capacities (or peer funds for peer-fund sweeps), comma separated",
    )
    sweep.add_argument("--p-values", type=_float_list, default=[0.3, 0.4, 0.5, 0.6, 0.7])
    sweep.add_argument("--p-step", type=float, default=0.01)
    sweep.add_argument("--fixed-fund", type=int, default=1_200_000, help="own fund for peer-fund sweeps")
    sweep.set_defaults(func=cmd_sweep)

    return parser


def main(argv: list[str] | None = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        # Config values become flags injected right after the subcommand, so
        # anything given explicitly on the command line still wins.
        try:
            injected = _config_flags(args.config)
        except (OSError, ValueError, json.JSONDecodeError) as exc:
            parser.error(str(exc))
        args = parser.parse_args([args.command] + injected + list(argv[1:]))
    _resolve_seed(args)
    return args.func(args, parser)


if __name__ == "__main__":
    sys.exit(main())
