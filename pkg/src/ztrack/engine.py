"""Decentralized gradient tracking driven by plug-in gradient estimates.

Every agent keeps a decision row x_i and a tracker row y_i.  One step
mixes the descent update x' = W (x - eta_k y), queries a fresh gradient
estimate g' at the new point, and refreshes the tracker with
y' = W y + g' - g.  Because W is doubly stochastic the tracker mean
always equals the running mean of the estimates, and the decision mean
performs inexact gradient descent on the average objective.

The estimator argument is any callable (objective, x, gamma, rng) ->
GradientEstimate, so the same engine runs the single-query zero-order
scheme and the noisy first-order baseline.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .estimators import GradientEstimate, one_point
from .objectives import Objective

__all__ = [
    "StepSchedule",
    "SwarmState",
    "MetricsRow",
    "RateConstants",
    "InvalidSchedule",
    "DivisionDomain",
    "validate_schedule",
    "init",
    "step",
    "metrics",
    "rate_constants",
    "rate_bound",
    "ITERATE_GUARD",
]

log = logging.getLogger(__name__)

# Diagnostic threshold on the stacked iterate norm; crossing it suggests a
# divergent step-size configuration but is deliberately not an error.
ITERATE_GUARD = 1e6

Estimator = Callable[[Objective, np.ndarray, float, np.random.Generator], GradientEstimate]


class InvalidSchedule(ValueError):
    """Step-size exponents violate the decay conditions."""


class DivisionDomain(ValueError):
    """Rate-bound denominators are not strictly positive."""


def validate_schedule(v1: float, v2: float, strict: bool = False) -> list[str]:
    """Return the list of violated decay conditions (empty when valid).

    The sufficient conditions are 0 < v1 + v2 <= 1, v1 + 3 v2 > 1 and
    v1 > 1/2.  With strict=True the sum must stay strictly below 1, which
    the finite-horizon rate certificate additionally requires.
    """
    bad = []
    if not v1 + v2 > 0.0:
        bad.append(f"need v1 + v2 > 0, got {v1 + v2:g}")
    if strict:
        if not v1 + v2 < 1.0:
            bad.append(f"need v1 + v2 < 1, got {v1 + v2:g}")
    elif not v1 + v2 <= 1.0:
        bad.append(f"need v1 + v2 <= 1, got {v1 + v2:g}")
    if not v1 + 3.0 * v2 > 1.0:
        bad.append(f"need v1 + 3*v2 > 1, got {v1 + 3.0 * v2:g}")
    if not v1 > 0.5:
        bad.append(f"need v1 > 1/2, got {v1:g}")
    return bad


@dataclass(frozen=True)
class StepSchedule:
    """Polynomially decaying step and exploration radii.

    eta(k) = eta0 / (1+k)^v1 scales the descent step, gamma(k) =
    gamma0 / (1+k)^v2 the query perturbation radius.  Construction
    enforces the decay conditions of validate_schedule.
    """

    eta0: float
    gamma0: float
    v1: float
    v2: float

    def __post_init__(self):
        if self.eta0 <= 0.0 or self.gamma0 <= 0.0:
            raise InvalidSchedule(
                f"need eta0 > 0 and gamma0 > 0, got {self.eta0}, {self.gamma0}"
            )
        bad = validate_schedule(self.v1, self.v2)
        if bad:
            raise InvalidSchedule("; ".join(bad))

    def eta(self, k: int) -> float:
        return self.eta0 * (1.0 + k) ** (-self.v1)

    def gamma(self, k: int) -> float:
        return self.gamma0 * (1.0 + k) ** (-self.v2)


@dataclass(frozen=True)
class SwarmState:
    """Stacked iterates after k steps: decisions x, trackers y, last estimates."""

    x: np.ndarray
    y: np.ndarray
    g_prev: np.ndarray
    k: int


def _stack_estimates(
    objectives: Sequence[Objective],
    points: np.ndarray,
    gamma_k: float,
    rngs: Sequence[np.random.Generator],
    estimator: Estimator,
) -> np.ndarray:
    g = np.empty_like(points)
    for i, obj in enumerate(objectives):
        g[i] = estimator(obj, points[i], gamma_k, rngs[i]).g
    return g


def init(
    x0: np.ndarray,
    objectives: Sequence[Objective],
    schedule: StepSchedule,
    rngs: Sequence[np.random.Generator],
    estimator: Estimator = one_point,
) -> SwarmState:
    """Query every objective once at its start row and seed the trackers.

    The tracker starts at y_0 = g_0 so its mean equals the mean estimate
    from the very first iteration.
    """
    x0 = np.array(x0, dtype=float)
    n = len(objectives)
    if x0.shape[0] != n or x0.ndim != 2:
        raise ValueError(f"x0 shape {x0.shape} does not stack {n} agent rows")
    if len(rngs) != n:
        raise ValueError(f"need one RNG stream per agent, got {len(rngs)} for {n}")
    g0 = _stack_estimates(objectives, x0, schedule.gamma(0), rngs, estimator)
    return SwarmState(x=x0, y=g0.copy(), g_prev=g0, k=0)


def step(
    state: SwarmState,
    w: np.ndarray,
    objectives: Sequence[Objective],
    schedule: StepSchedule,
    rngs: Sequence[np.random.Generator],
    estimator: Estimator = one_point,
    iterate_guard: float = ITERATE_GUARD,
) -> SwarmState:
    """Advance the swarm one iteration.

    Mixing applies to the mid-point x - eta_k y, each agent then queries
    its estimate at the new row with the next exploration radius, and the
    trackers are mixed and corrected by the estimate difference.  Agents
    are processed in index order with their own RNG streams, so results
    do not depend on how callers parallelize.
    """
    mat = w.w if hasattr(w, "w") else np.asarray(w, dtype=float)
    eta_k = schedule.eta(state.k)
    x_next = mat @ (state.x - eta_k * state.y)
    gamma_next = schedule.gamma(state.k + 1)
    g_next = _stack_estimates(objectives, x_next, gamma_next, rngs, estimator)
    y_next = mat @ state.y + g_next - state.g_prev
    norm = float(np.linalg.norm(x_next))
    if norm > iterate_guard:
        log.warning(
            "iterate norm %.3e exceeds guard %.1e at k=%d; "
            "step sizes may be too aggressive",
            norm,
            iterate_guard,
            state.k + 1,
        )
    return SwarmState(x=x_next, y=y_next, g_prev=g_next, k=state.k + 1)


@dataclass(frozen=True)
class MetricsRow:
    """Scalar diagnostics of one recorded iteration."""

    k: int
    eta: float
    gamma: float
    loss: float
    consensus_err: float
    tracking_err: float
    grad_norm_sq: float
    accuracy: float | None = None


def metrics(
    state: SwarmState,
    objectives: Sequence[Objective],
    schedule: StepSchedule,
) -> MetricsRow:
    """Evaluate the noise-free diagnostics at the current state.

    loss and grad_norm_sq describe the average objective at the mean
    decision row; consensus_err and tracking_err are squared Frobenius
    distances of the stacks from their row means.
    """
    xbar = state.x.mean(axis=0)
    ybar = state.y.mean(axis=0)
    loss = float(np.mean([obj.expectation(xbar) for obj in objectives]))
    grad = np.mean([obj.true_grad(xbar) for obj in objectives], axis=0)
    return MetricsRow(
        k=state.k,
        eta=schedule.eta(state.k),
        gamma=schedule.gamma(state.k),
        loss=loss,
        consensus_err=float(np.sum((state.x - xbar) ** 2)),
        tracking_err=float(np.sum((state.y - ybar) ** 2)),
        grad_norm_sq=float(grad @ grad),
    )


@dataclass(frozen=True)
class RateConstants:
    """Ingredients of the finite-horizon stationarity certificate."""

    a1: float
    a2: float
    a3: float
    a4: float
    mbar: float
    g: float


def rate_constants(
    delta0: float,
    smoothness: float,
    n: int,
    rho_w: float,
    sigma1: float,
    sigma3: float,
    sigma4: float,
    schedule: StepSchedule,
    x0_spread: float,
    mbar: float,
    g: float,
) -> RateConstants:
    """Assemble the four constants of the decay certificate.

    delta0 is the initial optimality gap of the average objective,
    x0_spread the squared consensus distance of the start rows, mbar a
    bound on the squared mean-estimate norm, g a bound on the tracking
    error norm.  Requires rho_w < 1 and a schedule that is strictly
    valid, including v1 + v2 < 1.
    """
    if not 0.0 <= rho_w < 1.0:
        raise InvalidSchedule(f"need 0 <= rho_w < 1, got {rho_w}")
    bad = validate_schedule(schedule.v1, schedule.v2, strict=True)
    if bad:
        raise InvalidSchedule("; ".join(bad))
    eta0, gamma0, v1, v2 = schedule.eta0, schedule.gamma0, schedule.v1, schedule.v2
    contraction = 1.0 - rho_w**2
    a1 = 2.0 * delta0 / (sigma3 * eta0 * gamma0) + (
        4.0 * smoothness**2 / n
    ) * x0_spread / contraction
    a2 = (sigma4**6 * sigma1**2 / (2.0 * sigma3**2)) * gamma0**2 * (v1 + 3.0 * v2)
    a3 = 2.0 * smoothness * mbar * eta0 * v1 / (sigma3 * gamma0)
    a4 = (12.0 * smoothness**2 * g**2 * eta0**2 / n) * (
        rho_w**2 * (1.0 + rho_w**2) / contraction**2
    ) * v1
    return RateConstants(a1=a1, a2=a2, a3=a3, a4=a4, mbar=mbar, g=g)


def rate_bound(constants: RateConstants, horizon: int, v1: float, v2: float) -> float:
    """Upper bound on the weighted average squared gradient after horizon steps.

    Evaluates
        (1 - v1 - v2) / ((K+2)^(1-v1-v2) - 1)
        * (A1 + A2/(v1+3v2-1) + A3/(2v1-1) + A4/(3v1-1))
    and raises DivisionDomain when any denominator fails to be positive.
    """
    if horizon < 1:
        raise ValueError(f"need horizon >= 1, got {horizon}")
    head = 1.0 - v1 - v2
    d2 = v1 + 3.0 * v2 - 1.0
    d3 = 2.0 * v1 - 1.0
    d4 = 3.0 * v1 - 1.0
    if head <= 0.0 or d2 <= 0.0 or d3 <= 0.0 or d4 <= 0.0:
        raise DivisionDomain(
            f"nonpositive denominator among 1-v1-v2={head:g}, v1+3v2-1={d2:g}, "
            f"2v1-1={d3:g}, 3v1-1={d4:g}"
        )
    dk = (horizon + 2.0) ** head - 1.0
    if dk <= 0.0:
        raise DivisionDomain(f"(K+2)^(1-v1-v2) - 1 = {dk:g} is not positive")
    return (head / dk) * (
        constants.a1 + constants.a2 / d2 + constants.a3 / d3 + constants.a4 / d4
    )
