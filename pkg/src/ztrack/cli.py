"""Command line front end.

Subcommands:
  run          run the configured estimator and write outputs
  compare      run it side by side with the noisy first-order baseline
  validate     parse and check a config file
  graph gen    sample a connected random graph and save its edge list
  graph check  validate a saved edge list and its mixing weights
  bias-check   Monte-Carlo bias measurement of the one-point estimator
  oracle-suite run the built-in self checks and print one line each
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import engine, estimators, oracles, topology
from .config import ExperimentConfig, ParseError, ValidationError, load_config
from .objectives import NoiseModel, logistic_objective, partition, quadratic_objective
from .outputs import emit_outputs
from .runner import compare_baselines, gen_two_gaussians, run_experiment

log = logging.getLogger("ztrack")


def _setup_logging(quiet: bool) -> None:
    logging.basicConfig(
        level=logging.WARNING if quiet else logging.INFO,
        format="%(levelname)s %(message)s",
    )


def _load(path: str) -> ExperimentConfig:
    try:
        return load_config(path)
    except ParseError as exc:
        print(f"{path}: parse error: {exc}", file=sys.stderr)
        raise SystemExit(2)
    except ValidationError as exc:
        print(f"{path}: invalid config:", file=sys.stderr)
        for v in exc.violations:
            print(f"  {v}", file=sys.stderr)
        raise SystemExit(2)


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, algorithm=replace(cfg.algorithm, seed=args.seed))
    if getattr(args, "out", None) is not None:
        cfg = replace(cfg, output=replace(cfg.output, directory=args.out))
    return cfg


def _cmd_run(args) -> int:
    cfg = _apply_overrides(_load(args.config), args)
    result = run_experiment(cfg, quiet=args.quiet)
    emit_outputs(result, cfg)
    last = result.rows[-1]
    print(
        f"{result.label}: k={last.k} loss={last.loss:.6g} "
        f"consensus_err={last.consensus_err:.6g}"
        + (
            f" accuracy={result.final_accuracy:.4f}"
            if result.final_accuracy is not None
            else ""
        )
    )
    return 0


def _cmd_compare(args) -> int:
    cfg = _apply_overrides(_load(args.config), args)
    zo, fo = compare_baselines(cfg, quiet=args.quiet)
    emit_outputs([zo, fo], cfg)
    for result in (zo, fo):
        last = result.rows[-1]
        print(f"{result.label}: k={last.k} loss={last.loss:.6g}")
    return 0


def _cmd_validate(args) -> int:
    cfg = _load(args.config)
    print(f"{args.config}: ok")
    print(
        f"  graph: "
        + (
            f"edge_list={cfg.graph.edge_list}"
            if cfg.graph.edge_list
            else f"n={cfg.graph.n} p={cfg.graph.p:g} seed={cfg.graph.seed}"
        )
    )
    print(f"  objective: kind={cfg.objective.kind}")
    print(
        f"  schedule: eta0={cfg.schedule.eta0:g} gamma0={cfg.schedule.gamma0:g} "
        f"v1={cfg.schedule.v1:g} v2={cfg.schedule.v2:g}"
    )
    print(
        f"  algorithm: estimator={cfg.algorithm.estimator} "
        f"iterations={cfg.algorithm.iterations} instances={cfg.algorithm.instances}"
    )
    return 0


def _cmd_graph_gen(args) -> int:
    graph = topology.gen_erdos_renyi(args.n, args.p, args.seed or 0)
    topology.save_edge_list(graph, args.out)
    w = topology.laplacian_weights(graph)
    print(f"wrote {args.out}: n={graph.n} edges={len(graph.edges)} rho_w={w.rho_w:.6f}")
    return 0


def _cmd_graph_check(args) -> int:
    try:
        graph = topology.load_edge_list(args.path)
    except ValueError as exc:
        print(f"{args.path}: {exc}", file=sys.stderr)
        return 1
    w = topology.laplacian_weights(graph)
    report = topology.validate_mixing(w)
    print(f"{args.path}: n={graph.n} edges={len(graph.edges)}")
    print(f"  {report}")
    return 0 if report.passed else 1


def _bias_objective(cfg: ExperimentConfig, rng: np.random.Generator):
    from .runner import _load_data  # reuse the harness data path

    noise = NoiseModel(zeta_sigma=cfg.objective.zeta_sigma, u_sigma=cfg.objective.u_sigma)
    if cfg.objective.kind == "quadratic":
        d = cfg.objective.d
        center = np.zeros(d) if not cfg.objective.center else None
        if center is None:
            vals = cfg.objective.center
            center = np.full(d, vals[0]) if len(vals) == 1 else np.asarray(vals)
        return quadratic_objective(center, noise)
    train, _ = _load_data(cfg)
    n = cfg.graph.n if cfg.graph.edge_list is None else topology.load_edge_list(
        cfg.graph.edge_list
    ).n
    shard = partition(train, n, rng)[0]
    return logistic_objective(shard, train.m, cfg.objective.c, noise, n_agents=n)


def _cmd_bias_check(args) -> int:
    cfg = _apply_overrides(_load(args.config), args)
    seed = args.seed if args.seed is not None else cfg.algorithm.seed
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xB1A5)))
    obj = _bias_objective(cfg, rng)
    x = rng.uniform(-1.0, 1.0, size=obj.dim)
    lines = []
    ok = True
    for gamma in (0.2, 0.1, 0.05):
        try:
            report = estimators.bias_characterize(obj, x, gamma, args.trials, rng)
        except ValueError as exc:
            print(f"bias-check: {exc}", file=sys.stderr)
            return 2
        lines.append(str(report))
        ok = ok and report.passed
        print(report)
    out_dir = Path(args.out if args.out else cfg.output.directory)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "bias_report.txt").write_text("\n".join(lines) + "\n")
    return 0 if ok else 1


def _oracle_suite(seed: int) -> list[oracles.OracleReport]:
    """Cross-checks of the package's own numerics; one report per line."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x0AC1E)))
    reports = []

    # Mixing invariants and power iteration vs dense SVD on random graphs.
    worst_resid = 0.0
    worst_gap = 0.0
    contraction_excess = 0.0
    for trial in range(25):
        n = int(rng.integers(2, 65))
        p = float(rng.uniform(0.2, 0.9))
        graph = topology.gen_erdos_renyi(n, p, int(rng.integers(0, 2**31)))
        w = topology.laplacian_weights(graph)
        rep = topology.validate_mixing(w)
        worst_resid = max(
            worst_resid, rep.row_sum_dev, rep.col_sum_dev, rep.symmetry_defect
        )
        dense = oracles.dense_spectral_norm(w.w - np.full((n, n), 1.0 / n))
        worst_gap = max(worst_gap, abs(w.rho_w - dense))
        omega = rng.standard_normal((n, 3))
        mixed = w.w @ omega
        lhs = float(np.linalg.norm(mixed - mixed.mean(axis=0)))
        rhs = w.rho_w * float(np.linalg.norm(omega - omega.mean(axis=0)))
        contraction_excess = max(contraction_excess, lhs - rhs)
    reports.append(
        oracles.OracleReport(
            "mixing-invariant-residual", worst_resid, 0.0, 1e-12, worst_resid <= 1e-12
        )
    )
    reports.append(
        oracles.OracleReport(
            "power-iteration-vs-dense", worst_gap, 0.0, 1e-8, worst_gap <= 1e-8
        )
    )
    reports.append(
        oracles.OracleReport(
            "mixing-contraction", contraction_excess, 0.0, 1e-9,
            contraction_excess <= 1e-9,
        )
    )

    # Finite differences vs analytic gradients.
    data = gen_two_gaussians(60, 4, 2.0, rng)
    obj_log = logistic_objective(data, data.m, 0.05, NoiseModel(), n_agents=3)
    obj_quad = quadratic_objective(np.array([1.0, -2.0, 0.5, 0.0]))
    worst_rel = 0.0
    for obj in (obj_log, obj_quad):
        for _ in range(5):
            x = rng.uniform(-1.0, 1.0, size=obj.dim)
            fd = oracles.finite_diff_grad(obj, x, h=1e-6)
            an = obj.true_grad(x)
            worst_rel = max(
                worst_rel,
                float(np.linalg.norm(fd - an) / max(np.linalg.norm(an), 1e-12)),
            )
    reports.append(
        oracles.OracleReport(
            "finite-diff-vs-gradient", worst_rel, 0.0, 1e-5, worst_rel <= 1e-5
        )
    )

    # Perturbation moments.
    zs = np.array([estimators.sample_perturbation(8, rng).z for _ in range(20_000)])
    norm_err = float(np.abs(np.linalg.norm(zs, axis=1) - 1.0).max())
    moment = float((zs**2).mean())
    mean_abs = float(np.abs(zs.mean(axis=0)).max())
    reports.append(
        oracles.OracleReport(
            "perturbation-norm", norm_err, 0.0, 1e-12, norm_err <= 1e-12
        )
    )
    reports.append(
        oracles.OracleReport(
            "perturbation-moment", moment, 1.0 / 8, 5e-3, abs(moment - 1.0 / 8) <= 5e-3
        )
    )
    # Each coordinate is +-1/sqrt(8), so its sample mean has standard
    # error 1/sqrt(8 * draws); four of those keeps the max over the 8
    # coordinates from failing on an unlucky seed.
    mean_tol = 4.0 / np.sqrt(8 * len(zs))
    reports.append(
        oracles.OracleReport(
            "perturbation-mean", mean_abs, 0.0, mean_tol, mean_abs <= mean_tol
        )
    )

    # Gradient-mismatch bound on random stacked states.
    worst = None
    for _ in range(20):
        x = rng.uniform(-2.0, 2.0, size=(3, obj_log.dim))
        rep = oracles.gradient_mismatch_check(
            [obj_log] * 3, x, obj_log.smoothness
        )
        if worst is None or rep.measured - rep.reference > worst.measured - worst.reference:
            worst = rep
    reports.append(worst)

    # One-point estimator mean on a quadratic (quick Monte Carlo).
    quad = quadratic_objective(np.zeros(2))
    x = np.array([1.0, 0.0])
    rep = estimators.bias_characterize(quad, x, gamma=0.1, trials=20_000, rng=rng)
    reports.append(
        oracles.OracleReport(
            "one-point-mean-quadratic",
            rep.measured_bias_norm,
            0.0,
            4.0 * rep.standard_error,
            rep.passed,
        )
    )
    return reports


def _cmd_oracle_suite(args) -> int:
    seed = args.seed if args.seed is not None else 0
    reports = _oracle_suite(seed)
    ok = True
    for rep in reports:
        print(rep)
        ok = ok and rep.passed
    print("oracle-suite:", "PASS" if ok else "FAIL")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ztrack",
        description="Decentralized gradient tracking from single noisy function queries.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("config", help="experiment config file")
        p.add_argument("--out", help="override output directory")
        p.add_argument("--seed", type=int, help="override base seed")
        p.add_argument("--quiet", action="store_true", help="suppress progress logs")

    p_run = sub.add_parser("run", help="run the configured estimator")
    common(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_cmp = sub.add_parser("compare", help="run against the first-order baseline")
    common(p_cmp)
    p_cmp.set_defaults(func=_cmd_compare)

    p_val = sub.add_parser("validate", help="check a config file")
    p_val.add_argument("config")
    p_val.set_defaults(func=_cmd_validate, quiet=True)

    p_graph = sub.add_parser("graph", help="graph utilities")
    gsub = p_graph.add_subparsers(dest="graph_command", required=True)
    p_gen = gsub.add_parser("gen", help="sample a connected random graph")
    p_gen.add_argument("n", type=int)
    p_gen.add_argument("p", type=float)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True, help="edge-list file to write")
    p_gen.add_argument("--quiet", action="store_true")
    p_gen.set_defaults(func=_cmd_graph_gen)
    p_chk = gsub.add_parser("check", help="validate an edge list")
    p_chk.add_argument("path")
    p_chk.add_argument("--quiet", action="store_true")
    p_chk.set_defaults(func=_cmd_graph_check)

    p_bias = sub.add_parser("bias-check", help="measure one-point estimator bias")
    common(p_bias)
    p_bias.add_argument("--trials", type=int, default=100_000)
    p_bias.set_defaults(func=_cmd_bias_check)

    p_suite = sub.add_parser("oracle-suite", help="run built-in self checks")
    p_suite.add_argument("--seed", type=int)
    p_suite.add_argument("--quiet", action="store_true")
    p_suite.set_defaults(func=_cmd_oracle_suite)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(getattr(args, "quiet", False))
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
