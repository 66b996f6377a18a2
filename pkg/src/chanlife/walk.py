"""Absorbing random-walk math for a single payment channel.

A channel is a one-dimensional walk: every payment moves the balance one
step of size omega toward one endpoint. The walk starts at x (0 = balanced),
a step is +1 with probability p and -1 with probability q = 1 - p, and the
channel is unbalanced the first time the walk hits +a or -b. The closed
forms below give the expected number of steps until absorption; a seeded
Monte-Carlo simulator serves as an independent check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Below this distance from 1/2 the general formula is a 0/0 limit; use the
# exact balanced solution instead.
P_BALANCED_TOLERANCE = 1e-9


class DegenerateChannelError(ValueError):
    """Channel cannot route even one payment in one direction."""


class DeadChannelError(ValueError):
    """Channel carries no payment flow in either direction."""


@dataclass(frozen=True)
class WalkParams:
    """Parameters of the walk: step-up probability and absorbing boundaries.

    p is the probability of a positive step (None until a direction
    probability has been derived from payment rates), a >= 1 is the positive
    boundary, b >= 1 the magnitude of the negative boundary, and x the start
    position with -b <= x <= a.
    """

    p: float | None
    a: int
    b: int
    x: int = 0

    def __post_init__(self) -> None:
        if self.p is not None and not 0.0 < self.p < 1.0:
            raise ValueError(f"p must be in (0, 1), got {self.p}")
        if self.a < 1:
            raise ValueError(f"positive boundary a must be >= 1, got {self.a}")
        if self.b < 1:
            raise ValueError(f"negative boundary b must be >= 1, got {self.b}")
        if not -self.b <= self.x <= self.a:
            raise ValueError(
                f"start x={self.x} outside [-b, a] = [{-self.b}, {self.a}]"
            )


@dataclass(frozen=True)
class ChannelSpec:
    """Funds committed by each side of a channel and the payment size.

    All amounts in satoshi. Capacity is the derived sum of both funds.
    """

    fund_a: int
    fund_b: int
    payment_size: int

    def __post_init__(self) -> None:
        if self.fund_a < 0 or self.fund_b < 0:
            raise ValueError("channel funds must be non-negative")
        if self.payment_size <= 0:
            raise ValueError("payment_size must be positive")

    @property
    def capacity(self) -> int:
        return self.fund_a + self.fund_b


@dataclass(frozen=True)
class LifespanEstimate:
    """Expected payments until first imbalance, and days when a rate is known."""

    expected_payments: float
    expected_days: float | None = None


@dataclass(frozen=True)
class MonteCarloResult:
    """Sample statistics of simulated absorption times.

    histogram[k] counts walks absorbed in exactly k steps.
    """

    mean_steps: float
    std_error: float
    histogram: np.ndarray
    trials: int


def discretize_funds(spec: ChannelSpec) -> WalkParams:
    """Convert channel funds to walk boundaries: a = floor(fund_a / omega).

    The direction probability p is left unset; it comes from payment rates.
    Raises DegenerateChannelError when either side cannot cover one payment.
    """
    a = spec.fund_a // spec.payment_size
    b = spec.fund_b // spec.payment_size
    if a == 0 or b == 0:
        raise DegenerateChannelError(
            f"degenerate channel: funds ({spec.fund_a}, {spec.fund_b}) sat "
            f"cannot route one {spec.payment_size}-sat payment both ways"
        )
    return WalkParams(p=None, a=int(a), b=int(b), x=0)


def _require_p(params: WalkParams) -> float:
    if params.p is None:
        raise ValueError("walk has no direction probability p set")
    return params.p


def _steps_balanced(a: int, b: int, x: int) -> float:
    # Unique quadratic through s(a) = s(-b) = 0 with s'' = -2.
    return float((a - x) * (b + x))


def _steps_biased(p: float, a: int, b: int, x: int) -> float:
    # Evaluated with rho = q/p <= 1 (callers canonicalize to p >= 1/2), via
    # f(k) = 1 - rho^k computed in log space so large boundaries neither
    # overflow nor lose the near-balanced cancellation:
    #   s_x = [(a + b) * f(b + x) / f(a + b) - (b + x)] / (p - q)
    q = 1.0 - p
    log_rho = math.log1p((1.0 - 2.0 * p) / p)

    def f(k: int) -> float:
        return -math.expm1(k * log_rho)

    # Ratio before product keeps the boundary cases exactly zero.
    result = ((a + b) * (f(b + x) / f(a + b)) - (b + x)) / (p - q)
    if not math.isfinite(result):
        raise ArithmeticError(
            f"absorption-time evaluation did not produce a finite value "
            f"for p={p}, a={a}, b={b}, x={x}"
        )
    return result


def expected_steps_from(params: WalkParams) -> float:
    """Expected steps to reach +a or -b starting from x.

    Balanced walks give (a - x)(b + x); biased walks use the closed form of
    the absorbing-walk recurrence. Exactly zero when starting on a boundary.
    """
    p = _require_p(params)
    a, b, x = params.a, params.b, params.x
    if abs(p - 0.5) < P_BALANCED_TOLERANCE:
        return _steps_balanced(a, b, x)
    if p < 0.5:
        # Mirror the axis so the drift points up: rho stays <= 1.
        return _steps_biased(1.0 - p, b, a, -x)
    return _steps_biased(p, a, b, x)


def expected_steps(params: WalkParams) -> float:
    """Expected steps to reach +a or -b starting from the balanced point x = 0.

    a * b for p = 1/2, the biased closed form otherwise.
    """
    if params.x != 0:
        raise ValueError("expected_steps requires x = 0; use expected_steps_from")
    return expected_steps_from(params)


def direction_probability(lambda_ab: float, lambda_ba: float) -> float:
    """Probability that the next payment flows a -> b, from the two rates.

    Merging two Poisson streams makes each arrival come from the first with
    probability lambda_ab / (lambda_ab + lambda_ba).
    """
    if lambda_ab < 0 or lambda_ba < 0:
        raise ValueError("payment rates must be non-negative")
    total = lambda_ab + lambda_ba
    if total == 0:
        raise DeadChannelError("dead channel: no payment flow in either direction")
    return lambda_ab / total

def expected_lifetime(steps: float, lambda_ab: float, lambda_ba: float) -> float:
    """Days until first imbalance: expected steps over the total payment rate."""
    if steps < 0:
        raise ValueError("steps must be non-negative")
    if lambda_ab < 0 or lambda_ba < 0:
        raise ValueError("payment rates must be non-negative")
    total = lambda_ab + lambda_ba
    if total == 0:
        raise DeadChannelError("dead channel: total payment rate is zero")
    return steps / total


def channel_lifespan(
    spec: ChannelSpec, lambda_ab: float, lambda_ba: float
) -> LifespanEstimate:
    """Full single-channel estimate from funds and the two directional rates."""
    params = discretize_funds(spec)
    p = direction_probability(lambda_ab, lambda_ba)
    steps = expected_steps(WalkParams(p=p, a=params.a, b=params.b))
    return LifespanEstimate(
        expected_payments=steps,
        expected_days=expected_lifetime(steps, lambda_ab, lambda_ba),
    )


def monte_carlo_absorption(
    params: WalkParams, trials: int, seed: int
) -> MonteCarloResult:
    """Simulate independent walks from x until absorption at +a or -b.

    Deterministic per seed. All walks advance in lockstep, so the per-round
    absorbed counts are exactly the step-count histogram.
    """
    p = _require_p(params)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    a, b = params.a, params.b

    pos = np.full(trials, params.x, dtype=np.int64)
    absorbed_counts = [int(np.count_nonzero((pos >= a) | (pos <= -b)))]
    pos = pos[(pos < a) & (pos > -b)]
    while pos.size:
        pos += np.where(rng.random(pos.size) < p, 1, -1)
        done = (pos >= a) | (pos <= -b)
        absorbed_counts.append(int(np.count_nonzero(done)))
        pos = pos[~done]

    histogram = np.array(absorbed_counts, dtype=np.int64)
    steps = np.arange(histogram.size, dtype=np.float64)
    mean = float(np.sum(steps * histogram) / trials)
    var = float(np.sum(histogram * (steps - mean) ** 2) / max(trials - 1, 1))
    return MonteCarloResult(
        mean_steps=mean,
        std_error=math.sqrt(var / trials),
        histogram=histogram,
        trials=trials,
    )
