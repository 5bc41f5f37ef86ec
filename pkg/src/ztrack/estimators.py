"""Gradient estimates built from noisy scalar function queries.

The single-query estimator returns g = z * f(x + gamma z) for a random
symmetric perturbation z.  Its conditional mean is sigma3 * gamma times
the true gradient plus a bias whose norm is at most
gamma * sigma4^3 * smoothness / (2 sigma3), so the raw estimate is a
scaled, slightly tilted gradient surrogate.  Multi-query estimators are
provided for comparison, along with a Monte-Carlo routine that measures
the bias against that bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .objectives import Objective

__all__ = [
    "Perturbation",
    "GradientEstimate",
    "BiasReport",
    "sample_perturbation",
    "one_point",
    "two_point",
    "coordinate_2d_point",
    "fo_noisy",
    "bias_characterize",
]


@dataclass(frozen=True)
class Perturbation:
    """Random direction with coordinates +-1/sqrt(d).

    sigma3 is the per-coordinate second moment (1/d) and sigma4 the exact
    Euclidean norm (1).
    """

    z: np.ndarray
    sigma3: float
    sigma4: float


@dataclass(frozen=True)
class GradientEstimate:
    """Estimate vector plus the query budget it consumed."""

    g: np.ndarray
    queries_used: int
    gamma_used: float


@dataclass(frozen=True)
class BiasReport:
    """Monte-Carlo summary of the one-point estimator's conditional mean."""

    empirical_mean: np.ndarray
    predicted_mean: np.ndarray
    measured_bias_norm: float
    bias_norm_bound: float
    standard_error: float
    trials: int
    gamma: float
    passed: bool

    def __str__(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (
            f"one-point bias: gamma={self.gamma:g} trials={self.trials} "
            f"measured={self.measured_bias_norm:.6g} "
            f"bound={self.bias_norm_bound:.6g} se={self.standard_error:.3g} {verdict}"
        )


def sample_perturbation(d: int, rng: np.random.Generator) -> Perturbation:
    """Draw z with i.i.d. symmetric Bernoulli coordinates +-1/sqrt(d)."""
    if d < 1:
        raise ValueError(f"need d >= 1, got {d}")
    scale = 1.0 / np.sqrt(d)
    z = rng.integers(0, 2, size=d) * (2.0 * scale) - scale
    return Perturbation(z=z, sigma3=1.0 / d, sigma4=1.0)


def one_point(
    obj: Objective,
    x: np.ndarray,
    gamma: float,
    rng: np.random.Generator,
    normalized: bool = False,
) -> GradientEstimate:
    """Single-query estimate g = z * f(x + gamma z).

    This is the raw form used by the tracking algorithm: no d/gamma
    normalization, so its conditional mean is sigma3 * gamma * grad plus
    the curvature bias.  Set normalized=True for the classical
    (d/gamma)-scaled variant, which is mean-consistent but has variance
    exploding as gamma shrinks.
    """
    if gamma <= 0.0:
        raise ValueError(f"need gamma > 0, got {gamma}")
    p = sample_perturbation(obj.dim, rng)
    f = obj.query(x + gamma * p.z, rng)
    g = p.z * f
    if normalized:
        g = g * (obj.dim / gamma)
    return GradientEstimate(g=g, queries_used=1, gamma_used=gamma)


def two_point(
    obj: Objective, x: np.ndarray, gamma: float, rng: np.random.Generator
) -> GradientEstimate:
    """Symmetric-difference estimate d * (f(x+gz) - f(x-gz)) / (2g) * z.

    Both queries share one perturbation but draw observation noise
    independently.
    """
    if gamma <= 0.0:
        raise ValueError(f"need gamma > 0, got {gamma}")
    p = sample_perturbation(obj.dim, rng)
    f_plus = obj.query(x + gamma * p.z, rng)
    f_minus = obj.query(x - gamma * p.z, rng)
    g = p.z * (obj.dim * (f_plus - f_minus) / (2.0 * gamma))
    return GradientEstimate(g=g, queries_used=2, gamma_used=gamma)


def coordinate_2d_point(
    obj: Objective, x: np.ndarray, gamma: float, rng: np.random.Generator
) -> GradientEstimate:
    """Central difference along every coordinate axis; 2d queries."""
    if gamma <= 0.0:
        raise ValueError(f"need gamma > 0, got {gamma}")
    d = obj.dim
    g = np.empty(d)
    e = np.zeros(d)
    for j in range(d):
        e[j] = gamma
        g[j] = (obj.query(x + e, rng) - obj.query(x - e, rng)) / (2.0 * gamma)
        e[j] = 0.0
    return GradientEstimate(g=g, queries_used=2 * d, gamma_used=gamma)


def fo_noisy(
    obj: Objective, x: np.ndarray, noise_sigma: float, rng: np.random.Generator
) -> GradientEstimate:
    """Exact gradient plus isotropic Gaussian noise; the first-order baseline."""
    if noise_sigma < 0.0:
        raise ValueError(f"need noise_sigma >= 0, got {noise_sigma}")
    g = obj.true_grad(x)
    if noise_sigma > 0.0:
        g = g + rng.normal(0.0, noise_sigma, size=obj.dim)
    return GradientEstimate(g=g, queries_used=1, gamma_used=0.0)


def bias_characterize(
    obj: Objective,
    x: np.ndarray,
    gamma: float,
    trials: int,
    rng: np.random.Generator,
) -> BiasReport:
    """Measure the one-point estimator's bias at x by Monte Carlo.

    Averages trials raw estimates, rescales by 1/(sigma3 * gamma) and
    compares the distance to the true gradient against the analytic
    curvature bound gamma * sigma4^3 * smoothness / (2 sigma3).  The check
    passes when the measured distance is within the bound plus four
    standard errors of the Monte-Carlo mean.
    """
    if trials < 10_000:
        raise ValueError(f"need at least 1e4 trials for a stable mean, got {trials}")
    d = obj.dim
    total = np.zeros(d)
    total_sq = np.zeros(d)
    sigma3 = sigma4 = None
    for _ in range(trials):
        p = sample_perturbation(d, rng)
        f = obj.query(x + gamma * p.z, rng)
        g = p.z * f
        total += g
        total_sq += g * g
        sigma3, sigma4 = p.sigma3, p.sigma4
    scale = sigma3 * gamma
    mean = total / trials
    var = (total_sq - trials * mean * mean) / (trials - 1)
    se = np.sqrt(np.maximum(var, 0.0) / trials) / scale
    empirical = mean / scale
    predicted = obj.true_grad(x)
    measured = float(np.linalg.norm(empirical - predicted))
    bound = gamma * sigma4**3 * obj.smoothness / (2.0 * sigma3)
    se_norm = float(np.linalg.norm(se))
    return BiasReport(
        empirical_mean=empirical,
        predicted_mean=predicted,
        measured_bias_norm=measured,
        bias_norm_bound=bound,
        standard_error=se_norm,
        trials=trials,
        gamma=gamma,
        passed=measured <= bound + 4.0 * se_norm,
    )
