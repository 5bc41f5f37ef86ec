"""Local objective functions queried through a noisy zero-order interface.

Each agent owns an Objective: a black box that answers scalar function
queries corrupted by observation noise.  The exact gradient and the
noise-free expectation are carried alongside purely for validation and
metrics; the optimizer itself only ever calls query.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

__all__ = [
    "Objective",
    "NoiseModel",
    "Dataset",
    "DimensionMismatch",
    "TooFewSamples",
    "load_dataset",
    "save_dataset",
    "partition",
    "logistic_objective",
    "quadratic_objective",
]

# Peak curvature of the sigmoid: max |s''| with s(t) = 1/(1+exp(-t)).
SIGMOID_CURV = 1.0 / (6.0 * np.sqrt(3.0))


def _sigmoid_neg(t: np.ndarray) -> np.ndarray:
    """1 / (1 + exp(t)) without overflow for large |t|."""
    out = np.empty_like(t)
    pos = t >= 0
    e = np.exp(-t[pos])
    out[pos] = e / (1.0 + e)
    out[~pos] = 1.0 / (1.0 + np.exp(t[~pos]))
    return out


def _sigmoid_slope(t: np.ndarray) -> np.ndarray:
    """s'(t) = s(t)(1 - s(t)) computed from exp(-|t|)."""
    a = np.exp(-np.abs(t))
    return a / (1.0 + a) ** 2


class DimensionMismatch(ValueError):
    """Query point does not match the objective dimension."""


class TooFewSamples(ValueError):
    """Dataset cannot be split into the requested number of shards."""


@dataclass(frozen=True)
class NoiseModel:
    """Observation noise knobs.

    zeta_sigma is the std of additive zero-mean noise applied once per
    scalar query; u_sigma is the std of the multiplicative factor
    u ~ N(1, u_sigma^2) redrawn per sample inside the logistic loss.
    """

    zeta_sigma: float = 0.0
    u_sigma: float = 0.0

    def __post_init__(self):
        if self.zeta_sigma < 0 or self.u_sigma < 0:
            raise ValueError("noise stds must be nonnegative")


@dataclass(frozen=True)
class Objective:
    """One agent's local cost.

    query(x, rng) returns a noisy scalar observation of the cost at x.
    true_grad and expectation describe the noise-free cost (multiplicative
    noise fixed at its mean, additive noise at zero) and exist only for
    oracles and metrics.  smoothness is a valid Lipschitz bound on the
    gradient of the expectation.
    """

    dim: int
    smoothness: float
    query: Callable[[np.ndarray, np.random.Generator], float]
    true_grad: Callable[[np.ndarray], np.ndarray]
    expectation: Callable[[np.ndarray], float]


@dataclass(frozen=True)
class Dataset:
    """Binary classification sample: features (m, d), labels in {-1, +1}."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels, dtype=float)
        if x.ndim != 2:
            raise ValueError(f"features must be 2-d, got shape {x.shape}")
        if y.shape != (x.shape[0],):
            raise ValueError(
                f"labels shape {y.shape} does not match {x.shape[0]} rows"
            )
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        if not np.all(np.isfinite(x)):
            raise ValueError("features must be finite")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    @property
    def m(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


def save_dataset(data: Dataset, path: str | Path) -> None:
    """Write 'm d' then one 'x_1 ... x_d y' row per sample."""
    with open(path, "w") as fh:
        fh.write(f"{data.m} {data.dim}\n")
        for row, label in zip(data.features, data.labels):
            feats = " ".join(repr(float(v)) for v in row)
            fh.write(f"{feats} {int(label)}\n")


def load_dataset(path: str | Path) -> Dataset:
    """Read a dataset written by save_dataset."""
    lines = [ln.strip() for ln in Path(path).read_text().splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise ValueError(f"{path}: empty dataset file")
    header = lines[0].split()
    if len(header) != 2:
        raise ValueError(f"{path}: header must be 'm d'")
    m, d = int(header[0]), int(header[1])
    if len(lines) - 1 != m:
        raise ValueError(f"{path}: header says {m} rows, found {len(lines) - 1}")
    feats = np.empty((m, d))
    labels = np.empty(m)
    for r, ln in enumerate(lines[1:]):
        parts = ln.split()
        if len(parts) != d + 1:
            raise ValueError(f"{path}: row {r} has {len(parts)} fields, want {d + 1}")
        feats[r] = [float(v) for v in parts[:d]]
        labels[r] = float(parts[d])
    return Dataset(features=feats, labels=labels)


def partition(data: Dataset, n: int, seed) -> list[Dataset]:
    """Split a dataset into n near-equal disjoint shards.

    Indices are shuffled with the given seed (int or Generator) and dealt
    out so shard sizes differ by at most one; the first m mod n shards
    get the extra sample.  Raises TooFewSamples if m < n.
    """
    if data.m < n:
        raise TooFewSamples(f"{data.m} samples cannot cover {n} agents")
    rng = np.random.default_rng(seed)
    order = rng.permutation(data.m)
    base, extra = divmod(data.m, n)
    shards = []
    start = 0
    for i in range(n):
        size = base + (1 if i < extra else 0)
        idx = order[start : start + size]
        shards.append(Dataset(features=data.features[idx], labels=data.labels[idx]))
        start += size
    return shards


def logistic_objective(
    shard: Dataset,
    m_total: int,
    c: float,
    noise: NoiseModel = NoiseModel(),
    n_agents: int = 1,
) -> Objective:
    """Sigmoid classification loss on one shard of a global dataset.

    The local cost is
        (1/m_total) * sum_j 1 / (1 + exp(u_j * y_j * X_j . x)) + (c/n_agents) ||x||^2
    so that averaging the n_agents local costs reproduces the global
    regularized loss over the full dataset.  Each query redraws the
    multiplicative factors u_j ~ N(1, u_sigma^2) per sample and adds one
    zero-mean observation noise draw.  A correctly classified sample
    (y * X.x >> 0) contributes a vanishing loss.
    """
    if m_total < shard.m:
        raise ValueError(f"m_total={m_total} smaller than shard size {shard.m}")
    if n_agents < 1:
        raise ValueError(f"n_agents must be >= 1, got {n_agents}")
    feats = shard.features
    margins_scale = shard.labels[:, None] * feats  # rows y_j * X_j
    d = shard.dim
    reg = c / n_agents

    def _check(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (d,):
            raise DimensionMismatch(f"point shape {x.shape}, objective dim {d}")
        return x

    def query(x: np.ndarray, rng: np.random.Generator) -> float:
        x = _check(x)
        t = margins_scale @ x
        if noise.u_sigma > 0.0:
            t = t * rng.normal(1.0, noise.u_sigma, size=t.shape)
        val = float(np.sum(_sigmoid_neg(t))) / m_total + reg * float(x @ x)
        if noise.zeta_sigma > 0.0:
            val += rng.normal(0.0, noise.zeta_sigma)
        return float(val)

    def expectation(x: np.ndarray) -> float:
        x = _check(x)
        t = margins_scale @ x
        return float(np.sum(_sigmoid_neg(t))) / m_total + reg * float(x @ x)

    def true_grad(x: np.ndarray) -> np.ndarray:
        x = _check(x)
        t = margins_scale @ x
        # d/dx of 1/(1+exp(t)) is -s'(t) * y_j X_j with s' = s(1-s)
        coef = -_sigmoid_slope(t)
        return (coef @ margins_scale) / m_total + 2.0 * reg * x

    # Hessian bound: sup |s''| * E[u^2] * sum ||X_j||^2 / m_total plus the
    # regularizer curvature.
    row_sq = float(np.sum(feats * feats))
    smooth = SIGMOID_CURV * (1.0 + noise.u_sigma**2) * row_sq / m_total + 2.0 * reg
    return Objective(
        dim=d,
        smoothness=smooth,
        query=query,
        true_grad=true_grad,
        expectation=expectation,
    )


def quadratic_objective(center: np.ndarray, noise: NoiseModel = NoiseModel()) -> Objective:
    """Half squared distance to a fixed center, with query noise.

    Gradient x - center, Hessian identically the identity, so the
    smoothness constant is exactly 1.
    """
    center = np.array(center, dtype=float)
    if center.ndim != 1:
        raise ValueError(f"center must be a vector, got shape {center.shape}")
    center.setflags(write=False)
    d = center.shape[0]

    def _check(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (d,):
            raise DimensionMismatch(f"point shape {x.shape}, objective dim {d}")
        return x

    def query(x: np.ndarray, rng: np.random.Generator) -> float:
        x = _check(x)
        diff = x - center
        val = 0.5 * float(diff @ diff)
        if noise.zeta_sigma > 0.0:
            val += rng.normal(0.0, noise.zeta_sigma)
        return val

    def expectation(x: np.ndarray) -> float:
        x = _check(x)
        diff = x - center
        return 0.5 * float(diff @ diff)

    def true_grad(x: np.ndarray) -> np.ndarray:
        x = _check(x)
        return x - center

    return Objective(
        dim=d,
        smoothness=1.0,
        query=query,
        true_grad=true_grad,
        expectation=expectation,
    )
