"""Independent numerical checks for the optimizer's building blocks.

Everything here recomputes a quantity by a different route than the
module it validates: gradients by central differences of the noise-free
expectation, spectral norms by dense SVD, inequality claims by direct
measurement.  Reports are small value objects so harness runs can append
them to a text log.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .engine import MetricsRow, StepSchedule
from .objectives import Objective

__all__ = [
    "OracleReport",
    "SizeGuard",
    "InsufficientData",
    "finite_diff_grad",
    "dense_spectral_norm",
    "gradient_mismatch_check",
    "consensus_summability_check",
]

DENSE_SIZE_CAP = 256


class SizeGuard(ValueError):
    """Matrix too large for the dense reference routine."""


class InsufficientData(ValueError):
    """Series too short for a meaningful tail check."""


@dataclass(frozen=True)
class OracleReport:
    """Outcome of one check: a measured value against a reference.

    For two-sided checks the pass criterion is |measured - reference| <=
    tolerance; for one-sided bound checks it is measured <= reference +
    tolerance.  The name records which convention applies.
    """

    name: str
    measured: float
    reference: float
    tolerance: float
    passed: bool

    def __str__(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (
            f"{self.name}: measured={self.measured:.6g} "
            f"reference={self.reference:.6g} tol={self.tolerance:.3g} {verdict}"
        )


def finite_diff_grad(obj: Objective, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of the noise-free expectation."""
    if h <= 0.0:
        raise ValueError(f"need h > 0, got {h}")
    x = np.asarray(x, dtype=float)
    g = np.empty(obj.dim)
    e = np.zeros(obj.dim)
    for j in range(obj.dim):
        e[j] = h
        g[j] = (obj.expectation(x + e) - obj.expectation(x - e)) / (2.0 * h)
        e[j] = 0.0
    return g


def dense_spectral_norm(m: np.ndarray) -> float:
    """Largest singular value via LAPACK; guarded to modest sizes."""
    m = np.asarray(m, dtype=float)
    if m.shape[0] > DENSE_SIZE_CAP or m.shape[1] > DENSE_SIZE_CAP:
        raise SizeGuard(f"matrix shape {m.shape} exceeds cap {DENSE_SIZE_CAP}")
    if m.size == 0:
        return 0.0
    return float(np.linalg.svd(m, compute_uv=False)[0])


def gradient_mismatch_check(
    objectives: Sequence[Objective], x: np.ndarray, smoothness: float
) -> OracleReport:
    """Check the gradient-mismatch bound at a stacked state x.

    The mean over agents of their gradients at their own rows can differ
    from the gradient of the average objective at the mean row by at most
    (smoothness / sqrt(n)) times the consensus distance.
    """
    x = np.asarray(x, dtype=float)
    n = len(objectives)
    if x.shape[0] != n:
        raise ValueError(f"state stacks {x.shape[0]} rows for {n} objectives")
    xbar = x.mean(axis=0)
    grad_at_mean = np.mean([obj.true_grad(xbar) for obj in objectives], axis=0)
    mean_of_grads = np.mean(
        [obj.true_grad(x[i]) for i, obj in enumerate(objectives)], axis=0
    )
    measured = float(np.linalg.norm(grad_at_mean - mean_of_grads))
    spread = float(np.sqrt(np.sum((x - xbar) ** 2)))
    reference = smoothness / np.sqrt(n) * spread
    tol = 1e-12 * max(1.0, reference)
    return OracleReport(
        name="gradient-mismatch-bound",
        measured=measured,
        reference=reference,
        tolerance=tol,
        passed=measured <= reference + tol,
    )


def consensus_summability_check(
    series: Sequence[MetricsRow], schedule: StepSchedule
) -> OracleReport:
    """Proxy check that the weighted consensus errors form a convergent sum.

    Accumulates both sum(eta_k gamma_k consensus_k) and sum(consensus_k)
    over the recorded rows and passes when, for each, the increment
    contributed by the last decade of iterations (k above a tenth of the
    horizon) stays below 10% of the total.  Needs at least 1000 rows.
    """
    if len(series) < 1000:
        raise InsufficientData(f"need >= 1000 rows, got {len(series)}")
    ks = np.array([row.k for row in series], dtype=float)
    ce = np.array([row.consensus_err for row in series], dtype=float)
    weights = np.array([schedule.eta(row.k) * schedule.gamma(row.k) for row in series])
    cutoff = ks.max() / 10.0
    tail = ks > cutoff
    fracs = []
    for terms in (weights * ce, ce):
        total = float(terms.sum())
        fracs.append(float(terms[tail].sum()) / total if total > 0.0 else 0.0)
    measured = max(fracs)
    return OracleReport(
        name="consensus-error-summability",
        measured=measured,
        reference=0.10,
        tolerance=0.0,
        passed=measured < 0.10,
    )
