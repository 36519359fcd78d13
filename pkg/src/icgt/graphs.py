"""Network topologies and doubly stochastic mixing matrices.

A mixing matrix W encodes one round of neighbor averaging.  Metropolis
weights make W symmetric and doubly stochastic for any connected undirected
graph, with eigenvalues 1 = lambda_1 > lambda_2 >= ... >= lambda_n > -1.
The spectral gap delta = 1 - max(|lambda_2|, |lambda_n|) governs how fast
averaging contracts the consensus error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AssumptionViolation, UnconnectableGraph
from .rng import substream

TOPOLOGY_KINDS = ("ring", "star", "complete", "erdos_renyi")

SYMMETRY_TOL = 1e-12
STOCHASTIC_TOL = 1e-12


@dataclass(frozen=True)
class Topology:
    kind: str
    n: int
    edges: tuple[tuple[int, int], ...]  # sorted (i, j) with i < j
    er_prob: float | None = None
    seed: int = 0

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        for i, j in self.edges:
            a[i, j] = a[j, i] = 1.0
        return a


@dataclass(frozen=True)
class SpectrumResult:
    eigenvalues: np.ndarray  # sorted descending
    lambda2: float | None
    lambda_n: float
    spectral_gap: float
    assumption_ok: bool


@dataclass(frozen=True)
class MixingMatrix:
    n: int
    W: np.ndarray
    eigenvalues: np.ndarray
    lambda2: float | None
    lambda_n: float
    spectral_gap: float
    assumption_ok: bool
    topology: Topology | None = field(default=None, compare=False)

    @classmethod
    def from_weights(cls, W: np.ndarray, topology: Topology | None = None) -> "MixingMatrix":
        """Wrap an explicit weight matrix, validating structure.

        Disconnected matrices (spectral gap <= 0) are representable and
        flagged via ``assumption_ok=False``; algorithms refuse them.
        """
        W = np.asarray(W, dtype=np.float64)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValueError("mixing matrix must be square")
        n = W.shape[0]
        if np.abs(W - W.T).max() > SYMMETRY_TOL:
            raise ValueError("mixing matrix must be symmetric")
        if np.abs(W.sum(axis=1) - 1.0).max() > STOCHASTIC_TOL:
            raise ValueError("mixing matrix rows must sum to 1")
        if W.min() < -1e-15:
            raise ValueError("mixing matrix entries must be nonnegative")
        spec = spectrum(W)
        return cls(
            n=n,
            W=W,
            eigenvalues=spec.eigenvalues,
            lambda2=spec.lambda2,
            lambda_n=spec.lambda_n,
            spectral_gap=spec.spectral_gap,
            assumption_ok=spec.assumption_ok,
            topology=topology,
        )


def _connected(n: int, edges) -> bool:
    if n <= 1:
        return True
    adj: list[list[int]] = [[] for _ in range(n)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = [False] * n
    stack = [0]
    seen[0] = True
    count = 1
    while stack:
        u = stack.pop()
        for w in adj[u]:
            if not seen[w]:
                seen[w] = True
                count += 1
                stack.append(w)
    return count == n


def build_topology(kind: str, n: int, er_prob: float = 0.5, seed: int = 0) -> Topology:
    """Construct a connected undirected graph of the given kind.

    Erdos-Renyi graphs sample each edge independently with probability
    ``er_prob`` and resample (fresh sub-seed) until connected, up to 100
    attempts, preserving the edge distribution conditioned on connectivity.
    """
    if n < 2:
        raise ValueError(f"topology needs at least 2 nodes, got n={n}")
    if kind not in TOPOLOGY_KINDS:
        raise ValueError(f"unknown topology kind {kind!r}; expected one of {TOPOLOGY_KINDS}")

    if kind == "ring":
        edges = sorted({tuple(sorted((i, (i + 1) % n))) for i in range(n)})
        return Topology(kind, n, tuple(edges), seed=seed)
    if kind == "star":
        edges = tuple((0, j) for j in range(1, n))
        return Topology(kind, n, edges, seed=seed)
    if kind == "complete":
        edges = tuple((i, j) for i in range(n) for j in range(i + 1, n))
        return Topology(kind, n, edges, seed=seed)

    # erdos_renyi
    if not (0.0 < er_prob <= 1.0):
        raise ValueError(f"er_prob must lie in (0, 1], got {er_prob}")
    for attempt in range(100):
        rng = substream(seed, "topology", attempt)
        upper = rng.random((n, n))
        edges = tuple(
            (i, j) for i in range(n) for j in range(i + 1, n) if upper[i, j] < er_prob
        )
        if _connected(n, edges):
            return Topology(kind, n, edges, er_prob=er_prob, seed=seed)
    raise UnconnectableGraph(
        f"no connected Erdos-Renyi graph in 100 attempts (n={n}, p={er_prob})"
    )


def metropolis_weights(topology: Topology) -> MixingMatrix:
    """Metropolis weights: w_ij = 1/(1 + max(deg_i, deg_j)) on edges,
    w_ii = 1 - sum_j w_ij.  Symmetric and doubly stochastic by construction."""
    if not _connected(topology.n, topology.edges):
        raise ValueError("metropolis_weights requires a connected topology")
    n = topology.n
    deg = topology.degrees()
    W = np.zeros((n, n))
    for i, j in topology.edges:
        w = 1.0 / (1.0 + max(deg[i], deg[j]))
        W[i, j] = w
        W[j, i] = w
    for i in range(n):
        W[i, i] = 1.0 - W[i].sum()
    return MixingMatrix.from_weights(W, topology=topology)


def spectrum(W: np.ndarray) -> SpectrumResult:
    """Eigen-data of a symmetric mixing matrix.

    Uses a self-adjoint solver only; general solvers introduce spurious
    imaginary parts.  A nonpositive spectral gap is reported, not raised.
    """
    W = np.asarray(W, dtype=np.float64)
    if np.abs(W - W.T).max() > 1e-10:
        raise ValueError("spectrum requires a symmetric matrix")
    eigs = np.sort(np.linalg.eigvalsh(W))[::-1]
    n = len(eigs)
    if n == 1:
        # single node: trivially consensual, full gap by convention
        return SpectrumResult(eigs, None, float(eigs[0]), 1.0, True)
    lambda2 = float(eigs[1])
    lambda_n = float(eigs[-1])
    gap = 1.0 - max(abs(lambda2), abs(lambda_n))
    ok = lambda2 < 1.0 and lambda_n > -1.0 and gap > 0.0
    return SpectrumResult(eigs, lambda2, lambda_n, gap, ok)


def require_valid_mixing(mix: MixingMatrix) -> None:
    """Raise when a mixing matrix violates the structural assumption."""
    if not mix.assumption_ok:
        raise AssumptionViolation(
            "mixing matrix has zero spectral gap (disconnected or periodic graph); "
            "algorithms require 1 = lambda_1 > lambda_2 and lambda_n > -1"
        )


def single_node_mixing() -> MixingMatrix:
    """The n=1 degenerate mixing matrix W = [[1]]."""
    return MixingMatrix.from_weights(np.array([[1.0]]))
