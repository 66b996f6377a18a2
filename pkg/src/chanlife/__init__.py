"""Effective-lifespan prediction and routing simulation for payment channel networks.

The library models a payment channel as a one-dimensional absorbing random
walk, derives each channel's payment rates and direction probability from
the network topology, predicts the expected time until the channel first
becomes unbalanced, and validates the predictions with a discrete-event
payment-routing simulator.
"""

__version__ = "0.1.0"

from .network import (
    PaymentGraph,
    RateBalanceReport,
    RatesMatrix,
    channel_direction_probability,
    channel_key,
    edge_betweenness,
    edge_payment_rate,
    edge_payment_rates,
    verify_symmetric_rate_balance,
)
from .evaluation import (
    ChannelPrediction,
    ErrorReport,
    EvaluationConfig,
    error_grid,
    evaluate,
    predict_all_lifespans,
)
from .simulator import (
    ChannelState,
    NoUnbalanceError,
    RandomSelection,
    RouteResult,
    ShortestPathSampler,
    SimResult,
    SingleChannelResult,
    TopBetweennessSelection,
    WindowSelection,
    initial_channel_states,
    route_payment,
    run_simulation,
    single_channel_experiment,
    unbalance_experiment,
)
from .snapshot import (
    SnapshotAnalysis,
    SnapshotRecord,
    analyze_snapshot,
    betweenness_lifespan_batches,
    load_snapshot,
)
from .traffic import (
    MRatesConfig,
    PaymentEvent,
    generate_mrates,
    generate_payment_stream,
    random_network,
    read_event_log,
    write_event_log,
)
from .walk import (
    ChannelSpec,
    DeadChannelError,
    DegenerateChannelError,
    LifespanEstimate,
    MonteCarloResult,
    WalkParams,
    channel_lifespan,
    direction_probability,
    discretize_funds,
    expected_lifetime,
    expected_steps,
    expected_steps_from,
    monte_carlo_absorption,
)

__all__ = [
    "ChannelPrediction",
    "ChannelSpec",
    "ChannelState",
    "DeadChannelError",
    "DegenerateChannelError",
    "ErrorReport",
    "EvaluationConfig",
    "LifespanEstimate",
    "MRatesConfig",
    "MonteCarloResult",
    "NoUnbalanceError",
    "PaymentEvent",
    "PaymentGraph",
    "RandomSelection",
    "RateBalanceReport",
    "RatesMatrix",
    "RouteResult",
    "ShortestPathSampler",
    "SimResult",
    "SingleChannelResult",
    "SnapshotAnalysis",
    "SnapshotRecord",
    "TopBetweennessSelection",
    "WalkParams",
    "WindowSelection",
    "analyze_snapshot",
    "betweenness_lifespan_batches",
    "channel_direction_probability",
    "channel_key",
    "channel_lifespan",
    "direction_probability",
    "discretize_funds",
    "edge_betweenness",
    "edge_payment_rate",
    "edge_payment_rates",
    "error_grid",
    "evaluate",
    "expected_lifetime",
    "expected_steps",
    "expected_steps_from",
    "generate_mrates",
    "generate_payment_stream",
    "initial_channel_states",
    "load_snapshot",
    "monte_carlo_absorption",
    "predict_all_lifespans",
    "random_network",
    "read_event_log",
    "route_payment",
    "run_simulation",
    "single_channel_experiment",
    "unbalance_experiment",
    "verify_symmetric_rate_balance",
    "write_event_log",
]
