"""Experiment configuration: sectioned key=value files.

The format is INI-like: [section] headers, key = value lines, full-line
comments starting with # or ;.  Parsing and validation are separate
stages so syntax problems report a line number (ParseError) while
semantic problems report every violated constraint at once
(ValidationError).

Sections and keys:

  [graph]      n, p, seed            random connected graph, or
               edge_list             path to a saved edge list
  [weights]    method                only "laplacian"
  [objective]  kind                  logistic | synthetic | quadratic
               c, zeta_sigma, u_sigma
               train, test           dataset paths (logistic)
               m, d, separation, test_m, data_seed   (synthetic)
               d, center             (quadratic; center scalar or comma list)
  [schedule]   eta0, gamma0, v1, v2
  [algorithm]  estimator             one_point | one_point_normalized |
                                     two_point | coordinate | first_order
               iterations, instances, seed, fo_sigma, threads
  [baseline]   eta0, v1, fo_sigma    first-order comparison run (optional)
  [output]     directory, stride, plots
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

from .engine import InvalidSchedule, StepSchedule

__all__ = [
    "ParseError",
    "ValidationError",
    "GraphConfig",
    "ObjectiveConfig",
    "AlgorithmConfig",
    "BaselineConfig",
    "OutputConfig",
    "ExperimentConfig",
    "load_config",
    "ESTIMATOR_KINDS",
]

ESTIMATOR_KINDS = (
    "one_point",
    "one_point_normalized",
    "two_point",
    "coordinate",
    "first_order",
)
OBJECTIVE_KINDS = ("logistic", "synthetic", "quadratic")


class ParseError(ValueError):
    """Syntax error in a config file; .line holds the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class ValidationError(ValueError):
    """Config parsed but violates constraints; .violations lists them all."""

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = tuple(violations)


@dataclass(frozen=True)
class GraphConfig:
    n: int = 0
    p: float = 0.0
    seed: int = 0
    edge_list: str | None = None


@dataclass(frozen=True)
class ObjectiveConfig:
    kind: str = "synthetic"
    c: float = 0.0
    zeta_sigma: float = 0.0
    u_sigma: float = 0.0
    train: str | None = None
    test: str | None = None
    m: int = 1000
    d: int = 10
    separation: float = 3.0
    test_m: int = 2000
    data_seed: int = 0
    center: tuple[float, ...] = ()


@dataclass(frozen=True)
class AlgorithmConfig:
    estimator: str = "one_point"
    iterations: int = 1000
    instances: int = 1
    seed: int = 0
    fo_sigma: float = 0.1
    threads: int = 1


@dataclass(frozen=True)
class BaselineConfig:
    eta0: float
    v1: float
    fo_sigma: float


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    stride: int = 1
    plots: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    graph: GraphConfig
    objective: ObjectiveConfig
    schedule: StepSchedule
    algorithm: AlgorithmConfig
    baseline: BaselineConfig
    output: OutputConfig


_KNOWN_KEYS = {
    "graph": {"n", "p", "seed", "edge_list"},
    "weights": {"method"},
    "objective": {
        "kind",
        "c",
        "zeta_sigma",
        "u_sigma",
        "train",
        "test",
        "m",
        "d",
        "separation",
        "test_m",
        "data_seed",
        "center",
    },
    "schedule": {"eta0", "gamma0", "v1", "v2"},
    "algorithm": {"estimator", "iterations", "instances", "seed", "fo_sigma", "threads"},
    "baseline": {"eta0", "v1", "fo_sigma"},
    "output": {"directory", "stride", "plots"},
}

_BOOL_WORDS = {
    "true": True,
    "yes": True,
    "on": True,
    "1": True,
    "false": False,
    "no": False,
    "off": False,
    "0": False,
}


class _Section:
    """One parsed section with typed getters that accumulate violations."""

    def __init__(self, name: str, values: dict[str, str], errors: list[str]):
        self.name = name
        self.values = values
        self.errors = errors

    def has(self, key: str) -> bool:
        return key in self.values

    def _raw(self, key: str, default):
        return self.values.get(key, default)

    def get_str(self, key: str, default: str | None = None) -> str | None:
        return self._raw(key, default)

    def get_int(self, key: str, default: int | None = None) -> int | None:
        raw = self._raw(key, None)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            self.errors.append(f"{self.name}.{key}: {raw!r} is not an integer")
            return default

    def get_float(self, key: str, default: float | None = None) -> float | None:
        raw = self._raw(key, None)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            self.errors.append(f"{self.name}.{key}: {raw!r} is not a number")
            return default

    def get_bool(self, key: str, default: bool) -> bool:
        raw = self._raw(key, None)
        if raw is None:
            return default
        val = _BOOL_WORDS.get(str(raw).lower())
        if val is None:
            self.errors.append(f"{self.name}.{key}: {raw!r} is not a boolean")
            return default
        return val


def _read_sections(path: str | Path) -> dict[str, dict[str, str]]:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            parser.read_file(fh, source=str(path))
    except configparser.MissingSectionHeaderError as exc:
        raise ParseError("key before any [section] header", exc.lineno) from exc
    except configparser.DuplicateOptionError as exc:
        raise ParseError(f"duplicate key {exc.option!r}", exc.lineno) from exc
    except configparser.DuplicateSectionError as exc:
        raise ParseError(f"duplicate section [{exc.section}]", exc.lineno) from exc
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ParseError("malformed line", line) from exc
    return {name: dict(parser.items(name)) for name in parser.sections()}


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse and validate an experiment config file.

    Raises ParseError for syntax problems (with line number) and
    ValidationError listing every violated constraint otherwise.
    """
    raw = _read_sections(path)
    errors: list[str] = []

    for section, keys in raw.items():
        if section not in _KNOWN_KEYS:
            errors.append(f"unknown section [{section}]")
            continue
        for key in keys:
            if key not in _KNOWN_KEYS[section]:
                errors.append(f"unknown key {section}.{key}")

    def section(name: str) -> _Section:
        return _Section(name, raw.get(name, {}), errors)

    # graph
    g = section("graph")
    edge_list = g.get_str("edge_list")
    n = g.get_int("n", 0)
    if edge_list is not None:
        if g.has("n") or g.has("p") or g.has("seed"):
            errors.append("graph: give either edge_list or n/p/seed, not both")
        graph_cfg = GraphConfig(edge_list=edge_list)
    else:
        p = g.get_float("p", 0.0)
        seed = g.get_int("seed", 0)
        if not g.has("n"):
            errors.append("graph.n: required when edge_list is not given")
        elif n < 2:
            errors.append(f"graph.n: need >= 2, got {n}")
        if not g.has("p"):
            errors.append("graph.p: required when edge_list is not given")
        elif not 0.0 < p <= 1.0:
            errors.append(f"graph.p: need 0 < p <= 1, got {p}")
        graph_cfg = GraphConfig(n=n, p=p, seed=seed)

    # weights
    wsec = section("weights")
    method = wsec.get_str("method", "laplacian")
    if method != "laplacian":
        errors.append(f"weights.method: unknown method {method!r}")

    # objective
    o = section("objective")
    kind = o.get_str("kind", "synthetic")
    if kind not in OBJECTIVE_KINDS:
        errors.append(f"objective.kind: {kind!r} not one of {OBJECTIVE_KINDS}")
    c = o.get_float("c", 0.0)
    zeta = o.get_float("zeta_sigma", 0.0)
    usig = o.get_float("u_sigma", 0.0)
    if c < 0.0:
        errors.append(f"objective.c: need >= 0, got {c}")
    if zeta < 0.0:
        errors.append(f"objective.zeta_sigma: need >= 0, got {zeta}")
    if usig < 0.0:
        errors.append(f"objective.u_sigma: need >= 0, got {usig}")
    train = o.get_str("train")
    test = o.get_str("test")
    m = o.get_int("m", 1000)
    d = o.get_int("d", 10)
    separation = o.get_float("separation", 3.0)
    test_m = o.get_int("test_m", 2000)
    data_seed = o.get_int("data_seed", 0)
    center_raw = o.get_str("center")
    center: tuple[float, ...] = ()
    if center_raw is not None:
        try:
            center = tuple(float(v) for v in center_raw.split(","))
        except ValueError:
            errors.append(f"objective.center: {center_raw!r} is not a comma list")
    if kind == "logistic" and train is None:
        errors.append("objective.train: required for kind=logistic")
    if kind == "synthetic":
        if m < 1:
            errors.append(f"objective.m: need >= 1, got {m}")
        if test_m < 0:
            errors.append(f"objective.test_m: need >= 0, got {test_m}")
        if separation <= 0.0:
            errors.append(f"objective.separation: need > 0, got {separation}")
    if d < 1:
        errors.append(f"objective.d: need >= 1, got {d}")
    if kind == "quadratic" and center and len(center) not in (1, d):
        errors.append(
            f"objective.center: {len(center)} values for dimension {d}"
        )
    obj_cfg = ObjectiveConfig(
        kind=kind,
        c=c,
        zeta_sigma=zeta,
        u_sigma=usig,
        train=train,
        test=test,
        m=m,
        d=d,
        separation=separation,
        test_m=test_m,
        data_seed=data_seed,
        center=center,
    )

    # schedule
    s = section("schedule")
    eta0 = s.get_float("eta0")
    gamma0 = s.get_float("gamma0")
    v1 = s.get_float("v1")
    v2 = s.get_float("v2")
    schedule = None
    if None in (eta0, gamma0, v1, v2):
        for key, val in (("eta0", eta0), ("gamma0", gamma0), ("v1", v1), ("v2", v2)):
            if val is None and not s.has(key):
                errors.append(f"schedule.{key}: required")
    else:
        try:
            schedule = StepSchedule(eta0=eta0, gamma0=gamma0, v1=v1, v2=v2)
        except InvalidSchedule as exc:
            errors.append(f"schedule: {exc}")

    # algorithm
    a = section("algorithm")
    estimator = a.get_str("estimator", "one_point")
    if estimator not in ESTIMATOR_KINDS:
        errors.append(f"algorithm.estimator: {estimator!r} not one of {ESTIMATOR_KINDS}")
    iterations = a.get_int("iterations", 1000)
    instances = a.get_int("instances", 1)
    alg_seed = a.get_int("seed", 0)
    fo_sigma = a.get_float("fo_sigma", 0.1)
    threads = a.get_int("threads", 1)
    if iterations < 1:
        errors.append(f"algorithm.iterations: need >= 1, got {iterations}")
    if instances < 1:
        errors.append(f"algorithm.instances: need >= 1, got {instances}")
    if fo_sigma < 0.0:
        errors.append(f"algorithm.fo_sigma: need >= 0, got {fo_sigma}")
    if threads < 1:
        errors.append(f"algorithm.threads: need >= 1, got {threads}")
    alg_cfg = AlgorithmConfig(
        estimator=estimator,
        iterations=iterations,
        instances=instances,
        seed=alg_seed,
        fo_sigma=fo_sigma,
        threads=threads,
    )

    # baseline (defaults fall back to the main schedule)
    b = section("baseline")
    b_eta0 = b.get_float("eta0", eta0 if eta0 is not None else 1.0)
    b_v1 = b.get_float("v1", v1 if v1 is not None else 0.51)
    b_fo = b.get_float("fo_sigma", fo_sigma)
    if b_eta0 is not None and b_eta0 <= 0.0:
        errors.append(f"baseline.eta0: need > 0, got {b_eta0}")
    if b_fo is not None and b_fo < 0.0:
        errors.append(f"baseline.fo_sigma: need >= 0, got {b_fo}")
    baseline_cfg = BaselineConfig(eta0=b_eta0, v1=b_v1, fo_sigma=b_fo)

    # output
    out = section("output")
    directory = out.get_str("directory", "out")
    stride = out.get_int("stride", max(1, iterations // 2000))
    plots = out.get_bool("plots", False)
    if stride < 1:
        errors.append(f"output.stride: need >= 1, got {stride}")
    out_cfg = OutputConfig(directory=directory, stride=stride, plots=plots)

    if errors:
        raise ValidationError(errors)
    assert schedule is not None
    return ExperimentConfig(
        graph=graph_cfg,
        objective=obj_cfg,
        schedule=schedule,
        algorithm=alg_cfg,
        baseline=baseline_cfg,
        output=out_cfg,
    )
