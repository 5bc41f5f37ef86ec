"""Communication graphs and doubly stochastic mixing matrices.

Agents sit on the nodes of a connected undirected graph and may only
exchange vectors with their neighbors.  Mixing is done with symmetric
Laplacian-based weights, which are doubly stochastic by construction and
contract disagreement at a rate governed by the spectral gap.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "Graph",
    "MixingMatrix",
    "MixingReport",
    "ConnectivityFailure",
    "NonConvergence",
    "gen_erdos_renyi",
    "laplacian_weights",
    "spectral_gap",
    "validate_mixing",
    "load_edge_list",
    "save_edge_list",
]

MAX_GEN_ATTEMPTS = 10_000
POWER_ITER_CAP = 100_000
POWER_ITER_TOL = 1e-10


class ConnectivityFailure(RuntimeError):
    """Random graph generation kept producing disconnected graphs."""


class NonConvergence(RuntimeError):
    """Power iteration failed to settle within the iteration cap."""


@dataclass(frozen=True)
class Graph:
    """Connected undirected graph on nodes 0..n-1 without self loops.

    Edges are stored as a frozenset of (i, j) pairs with i < j.
    """

    n: int
    edges: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"need at least 2 nodes, got n={self.n}")
        canon = set()
        for i, j in self.edges:
            if i == j:
                raise ValueError(f"self loop on node {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i},{j}) out of range for n={self.n}")
            canon.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(canon))
        if not self.is_connected():
            raise ValueError("graph is not connected")

    def neighbors(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        return adj

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        for i, j in self.edges:
            a[i, j] = a[j, i] = 1.0
        return a

    def laplacian(self) -> np.ndarray:
        return np.diag(self.degrees().astype(float)) - self.adjacency()

    def is_connected(self) -> bool:
        adj = self.neighbors()
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == self.n


@dataclass(frozen=True)
class MixingMatrix:
    """Symmetric doubly stochastic weights plus their contraction factor.

    rho_w is the spectral norm of w - (1/n) 11^T; values below 1 mean the
    matrix pulls the rows of any stacked iterate toward their mean.
    """

    w: np.ndarray
    rho_w: float

    def __post_init__(self):
        w = np.array(self.w, dtype=float)
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError(f"weights must be square, got shape {w.shape}")
        if not 0.0 <= self.rho_w < 1.0:
            raise ValueError(f"rho_w must lie in [0, 1), got {self.rho_w}")

    @property
    def n(self) -> int:
        return self.w.shape[0]


@dataclass(frozen=True)
class MixingReport:
    """Residuals from checking the mixing-matrix invariants."""

    row_sum_dev: float
    col_sum_dev: float
    symmetry_defect: float
    min_entry: float
    min_diagonal: float
    rho_w: float
    passed: bool
    failures: tuple[str, ...]

    def __str__(self) -> str:
        verdict = "PASS" if self.passed else "FAIL(" + ",".join(self.failures) + ")"
        return (
            f"mixing: row_dev={self.row_sum_dev:.3e} col_dev={self.col_sum_dev:.3e} "
            f"sym={self.symmetry_defect:.3e} min_entry={self.min_entry:.3e} "
            f"min_diag={self.min_diagonal:.3e} rho_w={self.rho_w:.6f} {verdict}"
        )


def gen_erdos_renyi(n: int, p: float, seed: int) -> Graph:
    """Sample a connected Erdos-Renyi graph G(n, p).

    Each unordered pair becomes an edge independently with probability p.
    Disconnected draws are rejected and resampled with a sub-seed derived
    from (seed, attempt); after MAX_GEN_ATTEMPTS rejections a
    ConnectivityFailure is raised.
    """
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    if not 0.0 < p <= 1.0:
        raise ValueError(f"need 0 < p <= 1, got {p}")
    iu, ju = np.triu_indices(n, k=1)
    for attempt in range(MAX_GEN_ATTEMPTS):
        rng = np.random.default_rng(np.random.SeedSequence((seed, attempt)))
        mask = rng.random(iu.size) < p
        edges = frozenset(
            (int(i), int(j)) for i, j in zip(iu[mask], ju[mask])
        )
        try:
            return Graph(n=n, edges=edges)
        except ValueError:
            continue
    raise ConnectivityFailure(
        f"no connected G({n}, {p}) after {MAX_GEN_ATTEMPTS} attempts (seed={seed})"
    )


def laplacian_weights(graph: Graph) -> MixingMatrix:
    """Build W = I - L / (d_max + 1) from the graph Laplacian L.

    The scaling by one plus the maximum degree keeps every entry
    nonnegative and the diagonal strictly positive, and symmetry of L
    makes W doubly stochastic.
    """
    tau = float(graph.degrees().max() + 1)
    w = np.eye(graph.n) - graph.laplacian() / tau
    return MixingMatrix(w=w, rho_w=spectral_gap(w))


def _as_matrix(w: MixingMatrix | np.ndarray) -> np.ndarray:
    if isinstance(w, MixingMatrix):
        return w.w
    return np.asarray(w, dtype=float)


def spectral_gap(
    w: MixingMatrix | np.ndarray,
    tol: float = POWER_ITER_TOL,
    max_iter: int = POWER_ITER_CAP,
) -> float:
    """Spectral norm of w - (1/n) 11^T by power iteration.

    Iterates on B^T B so that eigenvalue pairs of opposite sign cannot
    stall the iteration, and stops once the Rayleigh quotient is stable
    to the requested relative tolerance.  Raises NonConvergence if the
    estimate has not settled after max_iter sweeps.
    """
    b = _as_matrix(w)
    n = b.shape[0]
    b = b - np.full((n, n), 1.0 / n)
    m = b.T @ b
    v = np.random.default_rng(0xB1A5).standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    stable = 0
    for _ in range(max_iter):
        u = m @ v
        norm_u = np.linalg.norm(u)
        if norm_u < 1e-30:
            return 0.0
        v = u / norm_u
        lam_new = float(v @ (m @ v))
        if abs(lam_new - lam) <= tol * max(abs(lam_new), 1e-30):
            stable += 1
            if stable >= 3:
                return float(np.sqrt(max(lam_new, 0.0)))
        else:
            stable = 0
        lam = lam_new
    raise NonConvergence(f"power iteration did not settle in {max_iter} sweeps")


def validate_mixing(w: MixingMatrix | np.ndarray, tol: float = 1e-12) -> MixingReport:
    """Check symmetry, stochasticity, nonnegativity and contraction of w.

    Returns a report with one measured residual per invariant; it never
    raises, so it can be used on deliberately broken matrices.
    """
    m = _as_matrix(w)
    n = m.shape[0]
    row_dev = float(np.abs(m.sum(axis=1) - 1.0).max())
    col_dev = float(np.abs(m.sum(axis=0) - 1.0).max())
    sym = float(np.abs(m - m.T).max())
    min_entry = float(m.min())
    min_diag = float(np.diag(m).min())
    if isinstance(w, MixingMatrix):
        rho = w.rho_w
    else:
        try:
            rho = spectral_gap(m)
        except NonConvergence:
            rho = float("inf")
    failures = []
    if row_dev > tol:
        failures.append("row_sums")
    if col_dev > tol:
        failures.append("col_sums")
    if sym > tol:
        failures.append("symmetry")
    if min_entry < -tol:
        failures.append("nonnegative")
    if min_diag <= 0.0:
        failures.append("diagonal")
    if not rho < 1.0:
        failures.append("rho_w")
    return MixingReport(
        row_sum_dev=row_dev,
        col_sum_dev=col_dev,
        symmetry_defect=sym,
        min_entry=min_entry,
        min_diagonal=min_diag,
        rho_w=rho,
        passed=not failures,
        failures=tuple(failures),
    )


def save_edge_list(graph: Graph, path: str | Path) -> None:
    """Write the graph as a node count line followed by 'i j' lines."""
    lines = [str(graph.n)]
    for i, j in sorted(graph.edges):
        lines.append(f"{i} {j}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_edge_list(path: str | Path) -> Graph:
    """Read a graph written by save_edge_list.

    Duplicate edges are collapsed; self loops, out-of-range indices and
    disconnected graphs are rejected.
    """
    text = Path(path).read_text()
    rows = [ln.strip() for ln in text.splitlines()]
    rows = [ln for ln in rows if ln and not ln.startswith("#")]
    if not rows:
        raise ValueError(f"{path}: empty edge-list file")
    try:
        n = int(rows[0])
    except ValueError as exc:
        raise ValueError(f"{path}: first line must be the node count") from exc
    edges = set()
    for ln in rows[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise ValueError(f"{path}: malformed edge line {ln!r}")
        i, j = int(parts[0]), int(parts[1])
        edges.add((min(i, j), max(i, j)))
    return Graph(n=n, edges=frozenset(edges))
