"""Comparison-driven random search and a value-based two-point baseline.

The two comparison algorithms are ambient-blind: they receive an ambient
dimension, a starting point, a step schedule, and an oracle whose interface
exposes only compare / compare_batch / query_count.  No objective value,
gradient, or intrinsic dimension is visible to them; problem structure can
enter only through how the harness builds the schedule.  The instrument
callback is likewise opaque: whatever floats it returns are stored in the
trajectory and never influence a decision.

rsgf_run is the baseline and is deliberately different: it consumes exact
objective values through a plain callable, two evaluations per iteration.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import RngStream, gaussian_vector

SCHEDULE_KINDS = ("constant", "theory_constant", "cosine_decay")

# Trajectories record every iteration up to this horizon; longer runs are
# subsampled to roughly 10^4 evenly spaced records.
FULL_LOG_HORIZON = 100_000
TARGET_LOG_POINTS = 10_000

Instrument = Callable[[int, np.ndarray], tuple[float, float]]


def log_stride(horizon: int) -> int:
    """Record-keeping stride: 1 below FULL_LOG_HORIZON, else ceil(T / 10^4)."""
    if horizon <= FULL_LOG_HORIZON:
        return 1
    return math.ceil(horizon / TARGET_LOG_POINTS)


@dataclass(frozen=True)
class StepSchedule:
    """Step size alpha_t as a function of the iteration index t in [1, horizon].

    Kinds:
      constant         alpha_t = alpha0
      theory_constant  alpha_t = alpha0 / sqrt(intrinsic_dim * horizon)
      cosine_decay     max_rate -> min_rate over decay_steps, then min_rate
    """

    kind: str
    horizon: int
    alpha0: float = 1.0
    intrinsic_dim: int = 0
    max_rate: float = 0.0
    min_rate: float = 0.0
    decay_steps: int = 0

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.horizon < 1:
            raise ValueError("horizon must be a positive integer")
        if self.kind in ("constant", "theory_constant") and self.alpha0 <= 0:
            raise ValueError("alpha0 must be positive")
        if self.kind == "theory_constant" and self.intrinsic_dim < 1:
            raise ValueError("theory_constant needs intrinsic_dim >= 1")
        if self.kind == "cosine_decay":
            if not 0 < self.min_rate <= self.max_rate:
                raise ValueError("cosine_decay needs 0 < min_rate <= max_rate")
            if not 1 <= self.decay_steps <= self.horizon:
                raise ValueError("cosine_decay needs 1 <= decay_steps <= horizon")

    def step_at(self, t: int) -> float:
        if not 1 <= t <= self.horizon:
            raise ValueError(f"iteration {t} outside [1, {self.horizon}]")
        if self.kind == "constant":
            return self.alpha0
        if self.kind == "theory_constant":
            return self.alpha0 / math.sqrt(self.intrinsic_dim * self.horizon)
        if t >= self.decay_steps:
            return self.min_rate
        progress = (t - 1) / (self.decay_steps - 1)
        return self.min_rate + 0.5 * (self.max_rate - self.min_rate) * (
            1.0 + math.cos(math.pi * progress)
        )


def constant_schedule(alpha: float, horizon: int) -> StepSchedule:
    return StepSchedule(kind="constant", horizon=horizon, alpha0=alpha)


def theory_schedule(alpha0: float, intrinsic_dim: int, horizon: int) -> StepSchedule:
    return StepSchedule(
        kind="theory_constant",
        horizon=horizon,
        alpha0=alpha0,
        intrinsic_dim=intrinsic_dim,
    )


def cosine_schedule(
    max_rate: float, min_rate: float, decay_steps: int, horizon: int
) -> StepSchedule:
    return StepSchedule(
        kind="cosine_decay",
        horizon=horizon,
        max_rate=max_rate,
        min_rate=min_rate,
        decay_steps=decay_steps,
    )


@dataclass
class Trajectory:
    """Logged run history.  values / grad_norms come from the instrument
    callback (NaN when none was supplied) and play no role in the run."""

    steps: np.ndarray       # iteration indices of the logged records
    values: np.ndarray      # f(theta_t) before the t-th update
    grad_norms: np.ndarray  # ||grad f(theta_t)|| before the t-th update
    accepted: np.ndarray    # whether the t-th candidate was taken
    queries: np.ndarray     # cumulative oracle queries after iteration t
    theta_final: np.ndarray
    config: dict = field(default_factory=dict)

    @property
    def total_queries(self) -> int:
        return int(self.queries[-1]) if len(self.queries) else 0


class _TrajectoryBuilder:
    def __init__(self, horizon: int):
        self.stride = log_stride(horizon)
        self.horizon = horizon
        self.steps: list[int] = []
        self.values: list[float] = []
        self.grad_norms: list[float] = []
        self.accepted: list[bool] = []
        self.queries: list[int] = []

    def wants(self, t: int) -> bool:
        return (t - 1) % self.stride == 0 or t == self.horizon

    def add(self, t: int, value: float, grad_norm: float, accepted: bool, queries: int):
        self.steps.append(t)
        self.values.append(value)
        self.grad_norms.append(grad_norm)
        self.accepted.append(accepted)
        self.queries.append(queries)

    def build(self, theta_final: np.ndarray, config: dict | None = None) -> Trajectory:
        return Trajectory(
            steps=np.asarray(self.steps, dtype=np.int64),
            values=np.asarray(self.values, dtype=np.float64),
            grad_norms=np.asarray(self.grad_norms, dtype=np.float64),
            accepted=np.asarray(self.accepted, dtype=bool),
            queries=np.asarray(self.queries, dtype=np.int64),
            theta_final=np.asarray(theta_final, dtype=np.float64),
            config=dict(config or {}),
        )


def _probe(instrument: Instrument | None, t: int, theta: np.ndarray) -> tuple[float, float]:
    if instrument is None:
        return math.nan, math.nan
    value, grad_norm = instrument(t, theta)
    return float(value), float(grad_norm)


def ncrs_run(
    oracle,
    dim: int,
    theta1: np.ndarray,
    schedule: StepSchedule,
    horizon: int,
    rng: RngStream,
    instrument: Instrument | None = None,
) -> Trajectory:
    """Sign-comparison random search: one oracle query per iteration.

    At iteration t a Gaussian direction s is drawn, the candidate
    theta + alpha_t * s is compared against theta, and it replaces theta
    exactly when the oracle prefers it.
    """
    theta = np.array(theta1, dtype=np.float64)
    if theta.shape != (dim,):
        raise ValueError(f"theta1 must have shape ({dim},)")
    if horizon < 1 or horizon > schedule.horizon:
        raise ValueError("horizon must be in [1, schedule.horizon]")
    builder = _TrajectoryBuilder(horizon)
    queries_before = oracle.query_count
    for t in range(1, horizon + 1):
        logged = builder.wants(t)
        if logged:
            value, grad_norm = _probe(instrument, t, theta)
        direction = gaussian_vector(rng, dim)
        candidate = theta + schedule.step_at(t) * direction
        accept = oracle.compare(theta, candidate) > 0
        if accept:
            theta = candidate
        if logged:
            builder.add(t, value, grad_norm, accept, oracle.query_count - queries_before)
    return builder.build(theta)


def ncrs_vote_run(
    oracle,
    dim: int,
    theta1: np.ndarray,
    alpha: float,
    votes: int,
    horizon: int,
    rng: RngStream,
    instrument: Instrument | None = None,
) -> Trajectory:
    """Confidence-vote random search: `votes` queries on one pair per iteration.

    The candidate is accepted exactly when the summed score is positive; a
    zero sum keeps the current point.
    """
    theta = np.array(theta1, dtype=np.float64)
    if theta.shape != (dim,):
        raise ValueError(f"theta1 must have shape ({dim},)")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if votes < 1:
        raise ValueError("votes must be at least 1")
    if horizon < 1:
        raise ValueError("horizon must be a positive integer")
    builder = _TrajectoryBuilder(horizon)
    queries_before = oracle.query_count
    for t in range(1, horizon + 1):
        logged = builder.wants(t)
        if logged:
            value, grad_norm = _probe(instrument, t, theta)
        direction = gaussian_vector(rng, dim)
        candidate = theta + alpha * direction
        if hasattr(oracle, "compare_batch"):
            total = float(np.sum(oracle.compare_batch(theta, candidate, votes)))
        else:
            total = float(sum(oracle.compare(theta, candidate) for _ in range(votes)))
        accept = total > 0.0
        if accept:
            theta = candidate
        if logged:
            builder.add(t, value, grad_norm, accept, oracle.query_count - queries_before)
    return builder.build(theta)


def rsgf_run(
    value_fn: Callable[[np.ndarray], float],
    dim: int,
    theta1: np.ndarray,
    alpha: float,
    mu: float,
    horizon: int,
    rng: RngStream,
    instrument: Instrument | None = None,
) -> Trajectory:
    """Two-point Gaussian-smoothing gradient descent on exact values.

    theta <- theta - alpha * ((f(theta + mu s) - f(theta)) / mu) * s, with
    two value queries per iteration.
    """
    theta = np.array(theta1, dtype=np.float64)
    if theta.shape != (dim,):
        raise ValueError(f"theta1 must have shape ({dim},)")
    if alpha <= 0 or mu <= 0:
        raise ValueError("alpha and mu must be positive")
    if horizon < 1:
        raise ValueError("horizon must be a positive integer")
    builder = _TrajectoryBuilder(horizon)
    queries = 0
    for t in range(1, horizon + 1):
        logged = builder.wants(t)
        if logged:
            value, grad_norm = _probe(instrument, t, theta)
        direction = gaussian_vector(rng, dim)
        slope = (float(value_fn(theta + mu * direction)) - float(value_fn(theta))) / mu
        queries += 2
        theta = theta - alpha * slope * direction
        if logged:
            builder.add(t, value, grad_norm, True, queries)
    return builder.build(theta)


def rsgf_stable_step(smoothness: float, intrinsic_dim: int) -> float:
    """Largest step size with a certified per-iteration descent guarantee."""
    if smoothness <= 0 or intrinsic_dim < 1:
        raise ValueError("need smoothness > 0 and intrinsic_dim >= 1")
    return 1.0 / (4.0 * smoothness * (intrinsic_dim + 2))


@dataclass(frozen=True)
class VoteParams:
    """Vote-search parameters sufficient for an epsilon-stationary average."""

    epsilon: float
    step_size: float
    horizon: int
    votes: int

    @property
    def total_comparisons(self) -> int:
        return self.horizon * self.votes


def vote_params(
    epsilon: float,
    smoothness: float,
    intrinsic_dim: int,
    value_gap: float,
    margin_slope: float,
    second_moment_bound: float,
    margin_at_radius: float,
) -> VoteParams:
    """Step size, horizon, and vote count for the confidence-vote search.

    Inputs are the target accuracy epsilon in (0, 1), the smoothness bound
    L_f, the intrinsic dimension k, an upper bound on f(x1) - inf f, and the
    oracle certificate (margin slope c, second-moment constant C, and the
    margin value rho(r) at the certified linearity radius).

        alpha = 2 eps / (9 sqrt(2 pi) L k)
        T     = ceil(54 pi L k gap / eps^2)
        N     = ceil(max(54 pi L k l / eps^2, (2C + 4/3) ln 2 / rho(r)))
                with l = (2C + 4/3) / (e c)

    The second arm of N keeps the vote-failure factor at or below 1/2.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if smoothness <= 0 or value_gap <= 0 or margin_slope <= 0:
        raise ValueError("smoothness, value_gap, and margin_slope must be positive")
    if intrinsic_dim < 1:
        raise ValueError("intrinsic_dim must be at least 1")
    if second_moment_bound < 1.0:
        raise ValueError("second_moment_bound must be at least 1")
    if not 0.0 < margin_at_radius <= 1.0:
        raise ValueError("margin_at_radius must lie in (0, 1]")
    lk = smoothness * intrinsic_dim
    alpha = 2.0 * epsilon / (9.0 * math.sqrt(2.0 * math.pi) * lk)
    horizon = math.ceil(54.0 * math.pi * lk * value_gap / epsilon**2)
    bernstein = 2.0 * second_moment_bound + 4.0 / 3.0
    vote_scale = bernstein / (math.e * margin_slope)
    votes = math.ceil(
        max(
            54.0 * math.pi * lk * vote_scale / epsilon**2,
            bernstein * math.log(2.0) / margin_at_radius,
        )
    )
    return VoteParams(epsilon=epsilon, step_size=alpha, horizon=horizon, votes=votes)
