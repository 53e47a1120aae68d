"""Static communication topologies, random edge activation, and spectral constants.

A topology is an undirected connected graph over agents 0..n-1.  Per iteration
a random subset of edges is usable; the sampling law is an ActivationPolicy.
The spectral constants of the (activation-weighted) incidence products drive
the step-size rules of the primal-dual engine.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AssumptionViolationError, InvalidConfigError, InvalidInputError

# eigenvalues below this are treated as the structural zero of the Laplacian
EIG_FLOOR = 1e-10


@dataclass(frozen=True)
class Graph:
    """Undirected connected graph with a fixed edge ordering.

    Edges are pairs (i, j) with i < j; the edge index is the position in
    `edges`.  The incidence convention assigns +1 to i and -1 to j (the
    orientation cancels in every quantity computed here, it is fixed only
    for determinism).
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    redraws: int = field(default=0, compare=False)

    def __post_init__(self):
        if self.n < 2:
            raise InvalidConfigError(f"graph needs n >= 2 agents, got {self.n}")
        seen = set()
        for (i, j) in self.edges:
            if not (0 <= i < j < self.n):
                raise InvalidConfigError(f"edge ({i},{j}) is not ordered within [0,{self.n})")
            if (i, j) in seen:
                raise InvalidConfigError(f"duplicate edge ({i},{j})")
            seen.add((i, j))
        if not _connected(self.n, self.edges):
            raise InvalidConfigError("graph is not connected")

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def neighbors(self, i: int) -> list[int]:
        return [b if a == i else a for (a, b) in self.edges if i in (a, b)]

    def incident_edges(self, i: int) -> list[int]:
        return [e for e, (a, b) in enumerate(self.edges) if i in (a, b)]

    def incidence(self) -> np.ndarray:
        """|E| x n incidence matrix with the fixed +1/-1 orientation."""
        A = np.zeros((self.n_edges, self.n))
        for e, (i, j) in enumerate(self.edges):
            A[e, i] = 1.0
            A[e, j] = -1.0
        return A

    def to_edge_text(self) -> str:
        """One 'i j' pair per line, the config-file serialization."""
        return "\n".join(f"{i} {j}" for (i, j) in self.edges)


def graph_from_edge_text(n: int, text: str) -> Graph:
    edges = []
    for line in text.strip().splitlines():
        parts = line.split()
        if len(parts) != 2:
            raise InvalidConfigError(f"bad edge line {line!r}, expected 'i j'")
        i, j = int(parts[0]), int(parts[1])
        edges.append((min(i, j), max(i, j)))
    return Graph(n, tuple(edges))


def _connected(n: int, edges) -> bool:
    adj = [[] for _ in range(n)]
    for (i, j) in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = [False] * n
    stack = [0]
    seen[0] = True
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                stack.append(v)
    return all(seen)


def complete_graph(n: int) -> Graph:
    return Graph(n, tuple((i, j) for i in range(n) for j in range(i + 1, n)))


def path_graph(n: int) -> Graph:
    return Graph(n, tuple((i, i + 1) for i in range(n - 1)))


def build_er_graph(n: int, p: float, seed: int) -> Graph:
    """Connected Erdos-Renyi G(n, p) sample.

    Disconnected draws are rejected and redrawn with the seed advanced by one;
    the number of redraws is kept on the returned graph.
    """
    if n < 2:
        raise InvalidConfigError(f"ER graph needs n >= 2, got {n}")
    if not (0.0 < p <= 1.0):
        raise InvalidConfigError(f"ER edge probability must be in (0, 1], got {p}")
    redraws = 0
    while True:
        rng = np.random.default_rng(seed + redraws)
        mask = rng.random((n, n)) < p
        edges = tuple((i, j) for i in range(n) for j in range(i + 1, n) if mask[i, j])
        if _connected(n, edges):
            return Graph(n, edges, redraws=redraws)
        redraws += 1


# ---------------------------------------------------------------------------
# activation policies

FULL = "full"
SINGLE_EDGE = "single_edge"
BROADCAST_STAR = "broadcast_star"
BERNOULLI = "bernoulli"

_POLICY_KINDS = (FULL, SINGLE_EDGE, BROADCAST_STAR, BERNOULLI)


@dataclass(frozen=True)
class ActivationPolicy:
    """Law of the per-iteration usable edge set.

    kinds:
      full           -- every edge usable every iteration
      single_edge    -- exactly one edge, uniform over E
      broadcast_star -- one agent uniform, all its incident edges
      bernoulli      -- edge e included independently w.p. edge_probs[e]
    """

    kind: str
    edge_probs: float | tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in _POLICY_KINDS:
            raise InvalidConfigError(f"unknown activation kind {self.kind!r}")
        if self.kind == BERNOULLI:
            if self.edge_probs is None:
                raise InvalidConfigError("bernoulli activation needs edge_probs")
            probs = np.atleast_1d(np.asarray(self.edge_probs, dtype=float))
            if np.any(probs <= 0.0) or np.any(probs > 1.0):
                raise InvalidConfigError("bernoulli edge probabilities must lie in (0, 1]")
        elif self.edge_probs is not None:
            raise InvalidConfigError(f"edge_probs is only valid for {BERNOULLI!r}")

    def inclusion_probs(self, graph: Graph) -> np.ndarray:
        """Diagonal of R, the exact per-edge inclusion probabilities."""
        m = graph.n_edges
        if self.kind == FULL:
            return np.ones(m)
        if self.kind == SINGLE_EDGE:
            return np.full(m, 1.0 / m)
        if self.kind == BROADCAST_STAR:
            # edge (i,j) is active iff the selected agent is i or j
            return np.full(m, 2.0 / graph.n)
        probs = np.atleast_1d(np.asarray(self.edge_probs, dtype=float))
        if probs.size == 1:
            return np.full(m, probs[0])
        if probs.size != m:
            raise InvalidConfigError(
                f"bernoulli edge_probs has {probs.size} entries for {m} edges")
        return probs.copy()


@dataclass(frozen=True)
class EdgeActivation:
    """Edge indices usable during one iteration."""

    active: tuple[int, ...]


def sample_activation(graph: Graph, policy: ActivationPolicy, rng: np.random.Generator) -> EdgeActivation:
    if policy.kind == FULL:
        return EdgeActivation(tuple(range(graph.n_edges)))
    if policy.kind == SINGLE_EDGE:
        return EdgeActivation((int(rng.integers(graph.n_edges)),))
    if policy.kind == BROADCAST_STAR:
        agent = int(rng.integers(graph.n))
        return EdgeActivation(tuple(graph.incident_edges(agent)))
    probs = policy.inclusion_probs(graph)
    hits = rng.random(graph.n_edges) < probs
    return EdgeActivation(tuple(int(e) for e in np.nonzero(hits)[0]))


def incidence_apply(graph: Graph, activation: EdgeActivation, X: np.ndarray) -> np.ndarray:
    """Row i of the result is sum over active neighbors j of (x_i - x_j).

    This is A^T I(xi) A acting on X without materializing the matrices.
    Rows always sum to the zero vector (each edge contributes an exact
    +/- pair).
    """
    X = np.atleast_2d(X)
    if X.shape[0] != graph.n:
        raise InvalidInputError(f"X has {X.shape[0]} rows for {graph.n} agents")
    out = np.zeros_like(X, dtype=float)
    for e in activation.active:
        if not (0 <= e < graph.n_edges):
            raise InvalidInputError(f"activation references edge {e} outside the graph")
        i, j = graph.edges[e]
        diff = X[i] - X[j]
        out[i] += diff
        out[j] -= diff
    return out


# ---------------------------------------------------------------------------
# spectral constants

@dataclass(frozen=True)
class SpectralConstants:
    """Extremal nonzero eigenvalues of A^T R A and A^T A, plus the
    activation-variance constant.

    sigma_a_sq is the Monte-Carlo estimate of the smallest c with
    E||(A^T I(xi) A - A^T R A) x||^2 <= c ||A x||^2_R over unit vectors x;
    sigma_a_sq_bound is the closed-form operator-norm bound
    E||A(xi)^T R^-1 - A^T||^2 * ||R||.
    """

    rho_min: float
    rho_max: float
    rho_t_min: float
    rho_t_max: float
    sigma_a_sq: float
    sigma_a_sq_bound: float
    sigma_trials: int


def _extremal_nonzero_eigs(M: np.ndarray) -> tuple[float, float]:
    eigs = np.linalg.eigvalsh(M)
    nonzero = eigs[eigs > EIG_FLOOR]
    if nonzero.size != M.shape[0] - 1:
        raise AssumptionViolationError(
            f"expected exactly one zero eigenvalue on the consensus subspace, "
            f"got spectrum {eigs}")
    return float(nonzero[0]), float(nonzero[-1])


def _activation_support(graph: Graph, policy: ActivationPolicy, trials: int,
                        rng: np.random.Generator) -> tuple[list[np.ndarray], np.ndarray]:
    """Activation indicator vectors with their probability weights.

    Enumerable policies (full / single_edge / broadcast_star) are expanded
    exactly; bernoulli is sampled `trials` times with uniform weights.
    """
    m = graph.n_edges
    if policy.kind == FULL:
        return [np.ones(m)], np.array([1.0])
    if policy.kind == SINGLE_EDGE:
        inds = []
        for e in range(m):
            v = np.zeros(m)
            v[e] = 1.0
            inds.append(v)
        return inds, np.full(m, 1.0 / m)
    if policy.kind == BROADCAST_STAR:
        inds = []
        for agent in range(graph.n):
            v = np.zeros(m)
            v[graph.incident_edges(agent)] = 1.0
            inds.append(v)
        return inds, np.full(graph.n, 1.0 / graph.n)
    probs = policy.inclusion_probs(graph)
    inds = [(rng.random(m) < probs).astype(float) for _ in range(trials)]
    return inds, np.full(trials, 1.0 / trials)


def spectral_constants(graph: Graph, policy: ActivationPolicy, trials: int = 2000,
                       rng: np.random.Generator | None = None,
                       n_vectors: int = 64) -> SpectralConstants:
    """Compute the spectral constants of A^T R A and A^T A for a policy.

    Constants are computed at d=1; they are invariant under the Kronecker
    lift to any model dimension.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    A = graph.incidence()
    r_diag = policy.inclusion_probs(graph)
    if np.any(r_diag <= 0.0):
        raise AssumptionViolationError("some edge has zero inclusion probability")

    M = A.T @ (r_diag[:, None] * A)
    Mt = A.T @ A
    rho_min, rho_max = _extremal_nonzero_eigs(M)
    rho_t_min, rho_t_max = _extremal_nonzero_eigs(Mt)

    indicators, weights = _activation_support(graph, policy, trials, rng)

    # worst ratio E||(A^T I A - A^T R A) x||^2 / ||A x||^2_R over unit vectors
    xs = rng.standard_normal((n_vectors, graph.n))
    xs -= xs.mean(axis=1, keepdims=True)  # kill the consensual direction
    xs /= np.linalg.norm(xs, axis=1, keepdims=True)
    worst = 0.0
    for x in xs:
        ax = A @ x
        den = float(ax @ (r_diag * ax))
        mean_x = M @ x
        num = 0.0
        for ind, w in zip(indicators, weights):
            dev = A.T @ (ind * ax) - mean_x
            num += w * float(dev @ dev)
        worst = max(worst, num / den)

    if worst < 1e-20:  # deterministic activation: clamp fp dust to exactly zero
        worst = 0.0

    # closed-form operator-norm bound reported alongside
    bound = 0.0
    for ind, w in zip(indicators, weights):
        Mdev = A.T * (ind / r_diag)[None, :] - A.T
        bound += w * float(np.linalg.norm(Mdev, 2) ** 2)
    bound *= float(np.max(r_diag))

    return SpectralConstants(
        rho_min=rho_min, rho_max=rho_max,
        rho_t_min=rho_t_min, rho_t_max=rho_t_max,
        sigma_a_sq=float(worst), sigma_a_sq_bound=bound,
        sigma_trials=len(indicators),
    )
