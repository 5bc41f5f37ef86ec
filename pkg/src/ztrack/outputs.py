"""Deterministic experiment outputs: metrics CSV, summary text, plots.

Nothing here writes timestamps or machine identifiers, so a (config,
seed) pair reproduces every output byte.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import ExperimentConfig
from .engine import DivisionDomain, InvalidSchedule, MetricsRow, StepSchedule
from .engine import rate_bound, rate_constants
from .runner import RunResult

__all__ = ["emit_outputs", "metrics_csv_lines", "fit_tail_slope", "CSV_HEADER"]

log = logging.getLogger(__name__)

CSV_HEADER = "k,eta,gamma,loss,consensus_err,tracking_err,grad_norm_sq,accuracy"


def _fmt(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def metrics_csv_lines(rows: Sequence[MetricsRow]) -> list[str]:
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(
            f"{r.k},{_fmt(r.eta)},{_fmt(r.gamma)},{_fmt(r.loss)},"
            f"{_fmt(r.consensus_err)},{_fmt(r.tracking_err)},"
            f"{_fmt(r.grad_norm_sq)},{_fmt(r.accuracy)}"
        )
    return lines


def fit_tail_slope(rows: Sequence[MetricsRow]) -> float:
    """Least-squares slope of log consensus_err vs log k over the last decade.

    Uses rows with k above a tenth of the horizon and positive error;
    returns nan when fewer than two such rows exist.
    """
    ks = np.array([r.k for r in rows], dtype=float)
    ce = np.array([r.consensus_err for r in rows], dtype=float)
    keep = (ks > ks.max() / 10.0) & (ce > 0.0) & (ks > 0.0)
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(ks[keep]), np.log(ce[keep]), 1)[0])


def _rate_section(result: RunResult, schedule: StepSchedule) -> list[str]:
    """Evaluate the stationarity certificate against the measured average.

    Uses the initial loss as the optimality gap (valid because both
    built-in objectives are nonnegative), the max agent smoothness, and
    the measured running maxima for the estimate and tracking bounds.
    """
    d = result.dim
    sigma3, sigma4 = 1.0 / d, 1.0
    try:
        consts = rate_constants(
            delta0=result.loss0,
            smoothness=result.smoothness,
            n=result.n_agents,
            rho_w=result.rho_w,
            sigma1=result.smoothness,
            sigma3=sigma3,
            sigma4=sigma4,
            schedule=schedule,
            x0_spread=result.x0_spread,
            mbar=result.mbar,
            g=float(np.sqrt(result.g_sq_max)),
        )
        horizon = result.rows[-1].k
        bound = rate_bound(consts, horizon, schedule.v1, schedule.v2)
    except (InvalidSchedule, DivisionDomain) as exc:
        return [f"  rate certificate: not applicable ({exc})"]
    measured = result.weighted_grad_avg()
    ok = "yes" if bound >= measured else "NO"
    return [
        f"  rate constants: A1={consts.a1:.6g} A2={consts.a2:.6g} "
        f"A3={consts.a3:.6g} A4={consts.a4:.6g}",
        f"  rate inputs: delta0={result.loss0:.6g} Mbar={result.mbar:.6g} "
        f"G={np.sqrt(result.g_sq_max):.6g} rho_w={result.rho_w:.6g} "
        f"L={result.smoothness:.6g}",
        f"  weighted avg grad_norm_sq: {measured:.6g}",
        f"  certificate bound at K={result.rows[-1].k}: {bound:.6g} "
        f"(bound >= measured: {ok})",
    ]


def _summary_lines(
    results: Sequence[RunResult], cfg: ExperimentConfig
) -> list[str]:
    lines = [
        f"config: estimator={cfg.algorithm.estimator} "
        f"iterations={cfg.algorithm.iterations} instances={cfg.algorithm.instances} "
        f"seed={cfg.algorithm.seed}",
        f"schedule: eta0={cfg.schedule.eta0:g} gamma0={cfg.schedule.gamma0:g} "
        f"v1={cfg.schedule.v1:g} v2={cfg.schedule.v2:g}",
    ]
    for result in results:
        last = result.rows[-1]
        schedule = cfg.schedule
        if result.label == "first_order":
            schedule = StepSchedule(
                eta0=cfg.baseline.eta0,
                gamma0=cfg.schedule.gamma0,
                v1=cfg.baseline.v1,
                v2=cfg.schedule.v2,
            )
        lines.append(f"[{result.label}]")
        lines.append(
            f"  final: k={last.k} loss={last.loss:.6g} "
            f"consensus_err={last.consensus_err:.6g} "
            f"tracking_err={last.tracking_err:.6g} "
            f"grad_norm_sq={last.grad_norm_sq:.6g}"
            + (
                f" accuracy={result.final_accuracy:.6f}"
                if result.final_accuracy is not None
                else ""
            )
        )
        lines.append(f"  start: loss0={result.loss0:.6g} s1={result.s1:.6g}")
        slope = fit_tail_slope(result.rows)
        lines.append(f"  consensus tail slope: {slope:.4f} (inverse-k reference: -1)")
        if result.label.startswith("one_point"):
            lines.extend(_rate_section(result, schedule))
        for rep in result.reports:
            lines.append(f"  oracle {rep}")
    if len(results) == 2:
        a, b = results
        lines.append(
            f"comparison: final loss {a.label}={a.rows[-1].loss:.6g} "
            f"{b.label}={b.rows[-1].loss:.6g}"
        )
    return lines


def _plot(results: Sequence[RunResult], out_dir: Path) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    written = []
    metric_fields = [
        ("loss", "loss", False),
        ("consensus_err", "consensus error", True),
        ("tracking_err", "tracking error", False),
        ("grad_norm_sq", "squared gradient norm", False),
    ]
    for field, label, with_ref in metric_fields:
        fig, ax = plt.subplots(figsize=(5.5, 4))
        for result in results:
            ks = [r.k for r in result.rows]
            vals = [getattr(r, field) for r in result.rows]
            ax.loglog(ks, vals, label=result.label)
            if with_ref and result.s1 > 0.0:
                ref = [result.s1 / (k + 1.0) for k in ks]
                ax.loglog(ks, ref, "--", label=f"{result.label} s1/(k+1)")
        ax.set_xlabel("iteration k")
        ax.set_ylabel(label)
        ax.legend()
        ax.grid(True, which="both", alpha=0.3)
        path = out_dir / f"{field}.svg"
        fig.savefig(path, format="svg")
        plt.close(fig)
        written.append(path)
    if any(r.rows[-1].accuracy is not None for r in results):
        fig, ax = plt.subplots(figsize=(5.5, 4))
        for result in results:
            pts = [(r.k, r.accuracy) for r in result.rows if r.accuracy is not None]
            if pts:
                ax.semilogx([p[0] for p in pts], [p[1] for p in pts], label=result.label)
        ax.set_xlabel("iteration k")
        ax.set_ylabel("test accuracy")
        ax.legend()
        ax.grid(True, which="both", alpha=0.3)
        path = out_dir / "accuracy.svg"
        fig.savefig(path, format="svg")
        plt.close(fig)
        written.append(path)
    return written


def emit_outputs(
    results: RunResult | Sequence[RunResult],
    cfg: ExperimentConfig,
    out_dir: str | Path | None = None,
) -> list[Path]:
    """Write metrics CSVs, oracle report log, summary and optional plots.

    A single result writes metrics.csv; a pair (comparison run) writes
    metrics_<label>.csv each.  Returns the list of written paths.
    """
    if isinstance(results, RunResult):
        results = [results]
    out = Path(out_dir if out_dir is not None else cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for result in results:
        name = "metrics.csv" if len(results) == 1 else f"metrics_{result.label}.csv"
        path = out / name
        path.write_text("\n".join(metrics_csv_lines(result.rows)) + "\n")
        written.append(path)
    reports = [f"[{r.label}] {rep}" for r in results for rep in r.reports]
    if reports:
        path = out / "oracle_reports.txt"
        path.write_text("\n".join(reports) + "\n")
        written.append(path)
    path = out / "summary.txt"
    path.write_text("\n".join(_summary_lines(results, cfg)) + "\n")
    written.append(path)
    if cfg.output.plots:
        written.extend(_plot(results, out))
    for p in written:
        log.info("wrote %s", p)
    return written
