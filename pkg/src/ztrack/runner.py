"""Experiment orchestration: build the problem, run instances, average.

A run is fully determined by (config, base seed).  Instance i derives
every random choice from SeedSequence((base_seed, i)): data partition,
start rows, and one independent stream per agent per algorithm.  Results
are reduced in instance order, so thread counts never change the output.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import engine, estimators, oracles
from .config import ExperimentConfig
from .engine import MetricsRow, StepSchedule
from .objectives import Dataset, NoiseModel, Objective, load_dataset, partition
from .objectives import logistic_objective, quadratic_objective
from .oracles import OracleReport
from .topology import Graph, MixingMatrix, gen_erdos_renyi, laplacian_weights, load_edge_list

__all__ = [
    "RunResult",
    "run_experiment",
    "compare_baselines",
    "gen_two_gaussians",
    "predict_labels",
    "accuracy_of",
    "make_estimator",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunResult:
    """Instance-averaged outcome of one algorithm on one problem."""

    label: str
    rows: tuple[MetricsRow, ...]
    x_final: np.ndarray
    final_accuracy: float | None
    loss0: float
    s1: float
    x0_spread: float
    mbar: float
    g_sq_max: float
    rho_w: float
    smoothness: float
    dim: int
    n_agents: int
    reports: tuple[OracleReport, ...]

    def weighted_grad_avg(self) -> float:
        """sum(eta_k gamma_k grad_norm_sq) / sum(eta_k gamma_k) over rows."""
        w = np.array([r.eta * r.gamma for r in self.rows])
        g = np.array([r.grad_norm_sq for r in self.rows])
        return float((w * g).sum() / w.sum())


def gen_two_gaussians(
    m: int, d: int, separation: float, seed, balance: bool = True
) -> Dataset:
    """Two spherical Gaussian clouds labeled +-1.

    Class means sit at +-separation * u for a random unit direction u,
    i.e. separation is the distance from each class mean to the midpoint
    in within-class standard deviations.  Labels are balanced up to one
    sample.

    The direction u is part of the draw, so two calls with different
    seeds describe different classification problems.  To get a matching
    train/test pair, slice one call's output (as the experiment harness
    does) instead of drawing twice.
    """
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(d)
    u /= np.linalg.norm(u)
    n_pos = (m + 1) // 2
    labels = np.concatenate([np.ones(n_pos), -np.ones(m - n_pos)])
    if not balance:
        labels = rng.choice((-1.0, 1.0), size=m)
    feats = rng.standard_normal((m, d)) + separation * labels[:, None] * u
    order = rng.permutation(m)
    return Dataset(features=feats[order], labels=labels[order])


def predict_labels(features: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Classify with the sigmoid rule: +1 iff s(X.theta) >= 1/2 (ties to +1)."""
    return np.where(features @ theta >= 0.0, 1.0, -1.0)


def accuracy_of(data: Dataset, theta: np.ndarray) -> float:
    return float(np.mean(predict_labels(data.features, theta) == data.labels))


def make_estimator(kind: str, fo_sigma: float = 0.1) -> engine.Estimator:
    """Map a config estimator kind onto the engine's callable interface."""
    if kind == "one_point":
        return estimators.one_point
    if kind == "one_point_normalized":
        return lambda obj, x, gamma, rng: estimators.one_point(
            obj, x, gamma, rng, normalized=True
        )
    if kind == "two_point":
        return estimators.two_point
    if kind == "coordinate":
        return estimators.coordinate_2d_point
    if kind == "first_order":
        return lambda obj, x, gamma, rng: estimators.fo_noisy(obj, x, fo_sigma, rng)
    raise ValueError(f"unknown estimator kind {kind!r}")


def _build_graph(cfg: ExperimentConfig) -> Graph:
    if cfg.graph.edge_list is not None:
        return load_edge_list(cfg.graph.edge_list)
    return gen_erdos_renyi(cfg.graph.n, cfg.graph.p, cfg.graph.seed)


def _load_data(cfg: ExperimentConfig) -> tuple[Dataset | None, Dataset | None]:
    obj = cfg.objective
    if obj.kind == "logistic":
        train = load_dataset(obj.train)
        test = load_dataset(obj.test) if obj.test else None
        return train, test
    if obj.kind == "synthetic":
        # One draw covers train and test so both share the same clouds;
        # gen_two_gaussians shuffles rows, so slicing keeps labels mixed.
        full = gen_two_gaussians(
            obj.m + obj.test_m, obj.d, obj.separation,
            np.random.SeedSequence((obj.data_seed,)),
        )
        train = Dataset(features=full.features[: obj.m], labels=full.labels[: obj.m])
        test = None
        if obj.test_m > 0:
            test = Dataset(
                features=full.features[obj.m :], labels=full.labels[obj.m :]
            )
        return train, test
    return None, None


def _quadratic_center(cfg: ExperimentConfig) -> np.ndarray:
    center = cfg.objective.center
    d = cfg.objective.d
    if not center:
        return np.zeros(d)
    if len(center) == 1:
        return np.full(d, center[0])
    return np.asarray(center, dtype=float)


def _instance_objectives(
    cfg: ExperimentConfig, n: int, train: Dataset | None, part_seed
) -> list[Objective]:
    noise = NoiseModel(zeta_sigma=cfg.objective.zeta_sigma, u_sigma=cfg.objective.u_sigma)
    if cfg.objective.kind == "quadratic":
        center = _quadratic_center(cfg)
        return [quadratic_objective(center, noise) for _ in range(n)]
    shards = partition(train, n, np.random.default_rng(part_seed))
    return [
        logistic_objective(shard, train.m, cfg.objective.c, noise, n_agents=n)
        for shard in shards
    ]


@dataclass
class _InstanceOut:
    rows: list[MetricsRow]
    x_final: np.ndarray
    accuracy: float | None
    loss0: float
    s1: float
    x0_spread: float
    mbar: float
    g_sq_max: float
    final_state: engine.SwarmState
    objectives: list[Objective]


def _run_instance(
    cfg: ExperimentConfig,
    w: MixingMatrix,
    train: Dataset | None,
    test: Dataset | None,
    schedule: StepSchedule,
    estimator: engine.Estimator,
    base_seed: int,
    instance: int,
    stream_slot: int,
) -> _InstanceOut:
    """Run K iterations of one instance with fully derived randomness.

    stream_slot selects which spawned child drives the algorithm noise,
    so two algorithms compared on the same instance share the partition
    and start rows but draw independent queries.
    """
    n = w.n
    root = np.random.SeedSequence((base_seed, instance))
    part_ss, x0_ss, *algo_ss = root.spawn(4)
    objectives = _instance_objectives(cfg, n, train, part_ss)
    d = objectives[0].dim
    x0 = np.random.default_rng(x0_ss).uniform(-1.0, 1.0, size=(n, d))
    rngs = [np.random.default_rng(c) for c in algo_ss[stream_slot].spawn(n)]

    state = engine.init(x0, objectives, schedule, rngs, estimator)
    loss0 = float(np.mean([obj.expectation(state.x.mean(axis=0)) for obj in objectives]))
    x0_spread = float(np.sum((x0 - x0.mean(axis=0)) ** 2))
    ybar = state.y.mean(axis=0)
    mbar = float(ybar @ ybar)
    g_sq_max = float(np.sum((state.y - ybar) ** 2))
    s1 = 0.0

    k_total = cfg.algorithm.iterations
    stride = cfg.output.stride
    rows: list[MetricsRow] = []
    for k in range(1, k_total + 1):
        state = engine.step(state, w, objectives, schedule, rngs, estimator)
        ybar = state.y.mean(axis=0)
        mbar = max(mbar, float(ybar @ ybar))
        g_sq_max = max(g_sq_max, float(np.sum((state.y - ybar) ** 2)))
        if k == 1:
            xbar = state.x.mean(axis=0)
            s1 = float(np.sum((state.x - xbar) ** 2))
        if k % stride == 0 or k == k_total:
            row = engine.metrics(state, objectives, schedule)
            if test is not None:
                row = replace(row, accuracy=accuracy_of(test, state.x.mean(axis=0)))
            rows.append(row)
    accuracy = rows[-1].accuracy if test is not None else None
    return _InstanceOut(
        rows=rows,
        x_final=state.x.mean(axis=0),
        accuracy=accuracy,
        loss0=loss0,
        s1=s1,
        x0_spread=x0_spread,
        mbar=mbar,
        g_sq_max=g_sq_max,
        final_state=state,
        objectives=objectives,
    )


def _average_rows(per_instance: list[list[MetricsRow]]) -> tuple[MetricsRow, ...]:
    out = []
    for rows in zip(*per_instance):
        k = rows[0].k
        acc_vals = [r.accuracy for r in rows]
        acc = None if acc_vals[0] is None else float(np.mean(acc_vals))
        out.append(
            MetricsRow(
                k=k,
                eta=rows[0].eta,
                gamma=rows[0].gamma,
                loss=float(np.mean([r.loss for r in rows])),
                consensus_err=float(np.mean([r.consensus_err for r in rows])),
                tracking_err=float(np.mean([r.tracking_err for r in rows])),
                grad_norm_sq=float(np.mean([r.grad_norm_sq for r in rows])),
                accuracy=acc,
            )
        )
    return tuple(out)


def _run_label(
    cfg: ExperimentConfig,
    w: MixingMatrix,
    train: Dataset | None,
    test: Dataset | None,
    schedule: StepSchedule,
    estimator: engine.Estimator,
    label: str,
    stream_slot: int,
    quiet: bool = False,
) -> RunResult:
    base_seed = cfg.algorithm.seed
    instances = cfg.algorithm.instances

    def job(i: int) -> _InstanceOut:
        out = _run_instance(
            cfg, w, train, test, schedule, estimator, base_seed, i, stream_slot
        )
        if not quiet:
            log.info("%s: instance %d/%d done", label, i + 1, instances)
        return out

    if cfg.algorithm.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.algorithm.threads) as pool:
            outs = list(pool.map(job, range(instances)))
    else:
        outs = [job(i) for i in range(instances)]

    rows = _average_rows([o.rows for o in outs])
    accs = [o.accuracy for o in outs]
    final_accuracy = None if accs[0] is None else float(np.mean(accs))
    reports: list[OracleReport] = []
    if len(rows) >= 1000:
        reports.append(oracles.consensus_summability_check(rows, schedule))
    last = outs[-1]
    smoothness = max(obj.smoothness for obj in last.objectives)
    reports.append(
        oracles.gradient_mismatch_check(last.objectives, last.final_state.x, smoothness)
    )
    return RunResult(
        label=label,
        rows=rows,
        x_final=np.mean([o.x_final for o in outs], axis=0),
        final_accuracy=final_accuracy,
        loss0=float(np.mean([o.loss0 for o in outs])),
        s1=float(np.mean([o.s1 for o in outs])),
        x0_spread=float(np.mean([o.x0_spread for o in outs])),
        mbar=float(np.max([o.mbar for o in outs])),
        g_sq_max=float(np.max([o.g_sq_max for o in outs])),
        rho_w=w.rho_w,
        smoothness=smoothness,
        dim=last.objectives[0].dim,
        n_agents=w.n,
        reports=tuple(reports),
    )


def run_experiment(cfg: ExperimentConfig, quiet: bool = False) -> RunResult:
    """Run the configured estimator; returns the instance-averaged result."""
    graph = _build_graph(cfg)
    w = laplacian_weights(graph)
    train, test = _load_data(cfg)
    estimator = make_estimator(cfg.algorithm.estimator, cfg.algorithm.fo_sigma)
    if not quiet:
        log.info(
            "graph n=%d |E|=%d rho_w=%.4f; estimator=%s K=%d instances=%d",
            graph.n,
            len(graph.edges),
            w.rho_w,
            cfg.algorithm.estimator,
            cfg.algorithm.iterations,
            cfg.algorithm.instances,
        )
    return _run_label(
        cfg,
        w,
        train,
        test,
        cfg.schedule,
        estimator,
        label=cfg.algorithm.estimator,
        stream_slot=0,
        quiet=quiet,
    )


def compare_baselines(
    cfg: ExperimentConfig, quiet: bool = False
) -> tuple[RunResult, RunResult]:
    """Run the zero-order scheme and the noisy first-order baseline side by side.

    Both runs share the graph, the per-instance partitions and start
    rows; only the query streams differ.  The baseline reuses the main
    schedule's exploration decay but its own eta0 and v1.
    """
    graph = _build_graph(cfg)
    w = laplacian_weights(graph)
    train, test = _load_data(cfg)
    zo = _run_label(
        cfg,
        w,
        train,
        test,
        cfg.schedule,
        make_estimator(cfg.algorithm.estimator, cfg.algorithm.fo_sigma),
        label=cfg.algorithm.estimator,
        stream_slot=0,
        quiet=quiet,
    )
    base_schedule = StepSchedule(
        eta0=cfg.baseline.eta0,
        gamma0=cfg.schedule.gamma0,
        v1=cfg.baseline.v1,
        v2=cfg.schedule.v2,
    )
    fo = _run_label(
        cfg,
        w,
        train,
        test,
        base_schedule,
        make_estimator("first_order", cfg.baseline.fo_sigma),
        label="first_order",
        stream_slot=1,
        quiet=quiet,
    )
    return zo, fo
