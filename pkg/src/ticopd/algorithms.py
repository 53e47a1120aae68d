"""Iteration engines: the two-timescale compressed primal-dual method
(TiCoPD), the CHOCO-SGD and DSGD baselines, and the step-size rules.

One call to a *_step function advances one synchronous round.  All
randomness flows through named caller-owned streams so that gradient
sampling, edge activation, compressor dithering and channel noise can be
varied independently.  State arrays are updated in place.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .compression import ChannelSpec, CompressorSpec, bits_per_message, transmit
from .errors import AssumptionViolationError, InvalidConfigError, InvalidInputError
from .graphs import ActivationPolicy, EdgeActivation, Graph, SpectralConstants, sample_activation
from .objectives import Problem

EDGE_LOCAL = "edge_local"
GLOBAL = "global"

TIMING_ALGORITHM1 = "algorithm1"
TIMING_ANALYSIS = "analysis"

CONSTANT = "constant"
INV_SQRT = "inv_sqrt"
WARMUP_COSINE = "warmup_cosine"


@dataclass(frozen=True)
class RngStreams:
    """Independent named streams derived from one master seed."""

    gradient: np.random.Generator
    activation: np.random.Generator
    compression: np.random.Generator
    channel: np.random.Generator


def rng_streams(seed: int) -> RngStreams:
    """Counter-style derivation via SeedSequence spawn keys: changing one
    noise source never perturbs the others."""
    return RngStreams(*(
        np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(k,)))
        for k in range(4)))


def make_schedule(kind: str, base: float, total: int, warmup: int = 0):
    """Step-size schedule as a function of the iteration index."""
    if kind == CONSTANT:
        return lambda t: base
    if kind == INV_SQRT:
        return lambda t: base / math.sqrt(1.0 + t)
    if kind == WARMUP_COSINE:
        if not (0 < warmup < total):
            raise InvalidConfigError("warmup_cosine needs 0 < warmup < total steps")

        def sched(t):
            if t < warmup:
                return base * (t + 1) / warmup
            frac = (t - warmup) / max(1, total - warmup)
            return base * 0.5 * (1.0 + math.cos(math.pi * frac))

        return sched
    raise InvalidConfigError(f"unknown schedule {kind!r}")


# ---------------------------------------------------------------------------
# TiCoPD

@dataclass
class TiCoPDParams:
    alpha: float
    eta: float
    theta: float
    gamma: float
    compressor: CompressorSpec = CompressorSpec("identity")
    channel: ChannelSpec = ChannelSpec()
    surrogate_mode: str = EDGE_LOCAL
    message_timing: str = TIMING_ALGORITHM1
    batch: int | str = "full"
    alpha_schedule: str = CONSTANT
    schedule_total: int = 1
    schedule_warmup: int = 0

    def __post_init__(self):
        for name in ("alpha", "eta", "theta", "gamma"):
            if getattr(self, name) <= 0:
                raise InvalidConfigError(f"{name} must be positive")
        if self.gamma > 1.0 / self.compressor.r + 1e-12:
            raise InvalidConfigError("gamma must satisfy gamma <= 1/r")
        if self.surrogate_mode not in (EDGE_LOCAL, GLOBAL):
            raise InvalidConfigError(f"unknown surrogate mode {self.surrogate_mode!r}")
        if self.message_timing not in (TIMING_ALGORITHM1, TIMING_ANALYSIS):
            raise InvalidConfigError(f"unknown message timing {self.message_timing!r}")


@dataclass
class NetworkState:
    """Per-agent primal/dual variables plus the replicated surrogate store.

    Edge-local mode keeps, for every edge e = {i, j} and each endpoint,
    the transmitter-side copy (h_own) and the receiver-side replica
    (h_rep) of that endpoint's surrogate; both are advanced with the same
    decoded payload, so they must stay bitwise identical.
    Global mode keeps one surrogate row per agent (X_hat).
    """

    X: np.ndarray                 # (n, d)
    Lambda: np.ndarray            # (n, d)
    mode: str
    h_own: np.ndarray | None = None   # (|E|, 2, d)
    h_rep: np.ndarray | None = None   # (|E|, 2, d)
    X_hat: np.ndarray | None = None   # (n, d)
    t: int = 0


def ticopd_init(problem: Problem, graph: Graph, x0, params: TiCoPDParams) -> NetworkState:
    """Zero duals and surrogate copies coherently set to the initial primals."""
    n, d = problem.n, problem.d
    X = _as_state_matrix(x0, n, d)
    Lambda = np.zeros((n, d))
    if params.surrogate_mode == GLOBAL:
        return NetworkState(X=X, Lambda=Lambda, mode=GLOBAL, X_hat=X.copy())
    h_own = np.empty((graph.n_edges, 2, d))
    for e, (i, j) in enumerate(graph.edges):
        h_own[e, 0] = X[i]
        h_own[e, 1] = X[j]
    return NetworkState(X=X, Lambda=Lambda, mode=EDGE_LOCAL,
                        h_own=h_own, h_rep=h_own.copy())


def _as_state_matrix(x0, n: int, d: int) -> np.ndarray:
    if x0 is None:
        return np.zeros((n, d))
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim == 0:
        return np.full((n, d), float(x0))
    if x0.shape == (d,):
        return np.tile(x0, (n, 1))
    if x0.shape == (n, d):
        return x0.copy()
    raise InvalidInputError(f"x0 shape {x0.shape} does not match ({n}, {d})")


def _exchange_edge_local(state: NetworkState, graph: Graph, activation: EdgeActivation,
                         X_ref: np.ndarray, params: TiCoPDParams, rngs: RngStreams) -> int:
    """Both endpoints of every active edge transmit their compressed
    surrogate difference; transmitter and receiver apply the identical
    decoded payload."""
    bits = 0
    for e in activation.active:
        i, j = graph.edges[e]
        for slot, agent in ((0, i), (1, j)):
            msg = transmit(X_ref[agent] - state.h_own[e, slot],
                           params.compressor, params.channel,
                           rngs.compression, rngs.channel)
            step = params.gamma * msg.payload
            state.h_own[e, slot] += step
            state.h_rep[e, slot] += step
            bits += msg.bits
    return bits


def _exchange_global(state: NetworkState, activation: EdgeActivation,
                     X_ref: np.ndarray, params: TiCoPDParams, rngs: RngStreams) -> int:
    """Every agent refreshes its surrogate each round; bits are charged
    only for the active edges that actually carry the messages."""
    for i in range(state.X.shape[0]):
        msg = transmit(X_ref[i] - state.X_hat[i], params.compressor,
                       params.channel, rngs.compression, rngs.channel)
        state.X_hat[i] += params.gamma * msg.payload
    per_msg = bits_per_message(params.compressor, state.X.shape[1])
    return 2 * per_msg * len(activation.active)


def _consensus_terms(state: NetworkState, graph: Graph,
                     activation: EdgeActivation) -> np.ndarray:
    """Row i is the active-Laplacian action on the surrogates,
    sum over active neighbors j of (surrogate of x_i - surrogate of x_j),
    each agent reading only its own local copies."""
    n, d = state.X.shape
    s = np.zeros((n, d))
    if state.mode == GLOBAL:
        for e in activation.active:
            i, j = graph.edges[e]
            diff = state.X_hat[i] - state.X_hat[j]
            s[i] += diff
            s[j] -= diff
        return s
    for e in activation.active:
        i, j = graph.edges[e]
        # at agent i: its own surrogate copy minus the replica of j's; at
        # agent j the mirror image -- antisymmetric exactly when replicas
        # cohere bitwise
        s[i] += state.h_own[e, 0] - state.h_rep[e, 1]
        s[j] += state.h_own[e, 1] - state.h_rep[e, 0]
    return s


def ticopd_step(state: NetworkState, problem: Problem, graph: Graph,
                policy: ActivationPolicy, params: TiCoPDParams,
                rngs: RngStreams) -> tuple[NetworkState, int, dict]:
    """One synchronous round of the two-timescale primal-dual update.

    With the default algorithm1 timing the surrogate exchange runs first
    (using the current primals) and the primal-dual update consumes the
    refreshed surrogates; with analysis timing the primal-dual update uses
    the previous surrogates and the exchange tracks the new primals.
    """
    activation = sample_activation(graph, policy, rngs.activation)
    alpha_t = make_schedule(params.alpha_schedule, params.alpha,
                            params.schedule_total, params.schedule_warmup)(state.t)

    bits = 0
    if params.message_timing == TIMING_ALGORITHM1:
        if state.mode == EDGE_LOCAL:
            bits += _exchange_edge_local(state, graph, activation, state.X, params, rngs)
        else:
            bits += _exchange_global(state, activation, state.X, params, rngs)

    s = _consensus_terms(state, graph, activation)
    grads = problem.stochastic_grads(state.X, params.batch, rngs.gradient)

    x_bar_old = state.X.mean(axis=0)
    state.X -= alpha_t * (grads + state.Lambda + params.theta * s)
    state.Lambda += params.eta * s

    if params.message_timing == TIMING_ANALYSIS:
        if state.mode == EDGE_LOCAL:
            bits += _exchange_edge_local(state, graph, activation, state.X, params, rngs)
        else:
            bits += _exchange_global(state, activation, state.X, params, rngs)

    state.t += 1

    # runtime invariants: dual zero-sum, network-average recursion, coherence
    x_bar_new = state.X.mean(axis=0)
    grad_mean = grads.mean(axis=0)
    avg_residual = float(np.linalg.norm(x_bar_new - x_bar_old + alpha_t * grad_mean))
    avg_scale = max(1.0, float(np.linalg.norm(x_bar_old)),
                    float(np.linalg.norm(x_bar_new)),
                    alpha_t * float(np.linalg.norm(grad_mean)))
    diag = {
        "active_edges": len(activation.active),
        "dual_sum_norm": float(np.linalg.norm(state.Lambda.sum(axis=0))),
        "lambda_norm": float(np.linalg.norm(state.Lambda)),
        "avg_iterate_residual": avg_residual,
        "avg_iterate_scale": avg_scale,
        "coherence_gap": (0.0 if state.mode == GLOBAL else
                          float(np.max(np.abs(state.h_own - state.h_rep)))),
    }
    return state, bits, diag


# ---------------------------------------------------------------------------
# baselines

@dataclass
class ChocoParams:
    eta: float
    gamma: float
    compressor: CompressorSpec = CompressorSpec("identity")
    channel: ChannelSpec = ChannelSpec()
    batch: int | str = "full"
    eta_schedule: str = CONSTANT
    schedule_total: int = 1
    schedule_warmup: int = 0

    def __post_init__(self):
        if self.eta <= 0:
            raise InvalidConfigError("eta must be positive")
        if self.gamma < 0:
            raise InvalidConfigError("gamma must be >= 0")


@dataclass
class ChocoState:
    X: np.ndarray
    X_hat: np.ndarray
    t: int = 0


def choco_init(problem: Problem, x0) -> ChocoState:
    X = _as_state_matrix(x0, problem.n, problem.d)
    return ChocoState(X=X, X_hat=X.copy())


def choco_sgd_step(state: ChocoState, problem: Problem, graph: Graph,
                   policy: ActivationPolicy, params: ChocoParams,
                   rngs: RngStreams) -> tuple[ChocoState, int, dict]:
    """Adaptation-then-consensus round of compressed DSGD:
    X_hat += Q(X - eta grad - X_hat); X <- X - eta grad + gamma (W - I) X_hat
    with Metropolis weights W on the activated subgraph."""
    activation = sample_activation(graph, policy, rngs.activation)
    eta_t = make_schedule(params.eta_schedule, params.eta,
                          params.schedule_total, params.schedule_warmup)(state.t)

    grads = problem.stochastic_grads(state.X, params.batch, rngs.gradient)
    adapted = state.X - eta_t * grads

    for i in range(problem.n):
        msg = transmit(adapted[i] - state.X_hat[i], params.compressor,
                       params.channel, rngs.compression, rngs.channel)
        state.X_hat[i] += msg.payload
    bits = 2 * bits_per_message(params.compressor, problem.d) * len(activation.active)

    W = metropolis_weights(graph, activation)
    state.X = adapted + params.gamma * (W @ state.X_hat - state.X_hat)
    state.t += 1
    return state, bits, {"active_edges": len(activation.active)}


@dataclass
class DsgdParams:
    alpha: float
    batch: int | str = "full"
    alpha_schedule: str = CONSTANT
    schedule_total: int = 1
    schedule_warmup: int = 0

    def __post_init__(self):
        if self.alpha < 0:
            raise InvalidConfigError("alpha must be >= 0")


@dataclass
class DsgdState:
    X: np.ndarray
    t: int = 0


def dsgd_init(problem: Problem, x0) -> DsgdState:
    return DsgdState(X=_as_state_matrix(x0, problem.n, problem.d))


def dsgd_step(state: DsgdState, problem: Problem, graph: Graph,
              policy: ActivationPolicy, params: DsgdParams,
              rngs: RngStreams) -> tuple[DsgdState, int, dict]:
    """Gossip step X <- W(xi) (X - alpha grad) with uncompressed exchange,
    charged at the 32-bit-per-coordinate rate on active edges."""
    activation = sample_activation(graph, policy, rngs.activation)
    alpha_t = make_schedule(params.alpha_schedule, params.alpha,
                            params.schedule_total, params.schedule_warmup)(state.t)
    grads = problem.stochastic_grads(state.X, params.batch, rngs.gradient)
    W = metropolis_weights(graph, activation)
    state.X = W @ (state.X - alpha_t * grads)
    state.t += 1
    bits = 2 * 32 * problem.d * len(activation.active)
    return state, bits, {"active_edges": len(activation.active)}


def metropolis_weights(graph: Graph, activation: EdgeActivation) -> np.ndarray:
    """Symmetric doubly stochastic weights on the activated subgraph:
    w_ij = 1/(1 + max(deg_i, deg_j)) with degrees in the active edge set;
    inactive agents keep self-weight one."""
    n = graph.n
    deg = np.zeros(n, dtype=int)
    for e in activation.active:
        i, j = graph.edges[e]
        deg[i] += 1
        deg[j] += 1
    W = np.zeros((n, n))
    for e in activation.active:
        i, j = graph.edges[e]
        w = 1.0 / (1.0 + max(deg[i], deg[j]))
        W[i, j] = W[j, i] = w
    np.fill_diagonal(W, 1.0 - W.sum(axis=1))
    return W


# ---------------------------------------------------------------------------
# step-size rules

@dataclass(frozen=True)
class StepSizePlan:
    """Step sizes satisfying the convergence conditions for a given
    topology/compressor pair; alpha_ub is evaluated at the chosen theta."""

    eta: float
    theta_lb: float
    alpha_ub: float
    theta: float


def theorem_step_sizes(constants: SpectralConstants, L: float, n: int, a: float,
                       gamma: float, delta: float, r: float = 1.0,
                       theta_multiplier: float = 1.0) -> StepSizePlan:
    """Literal evaluation of the convergence-guarantee step sizes.

    eta = r gamma delta / (8 rho_t_max);
    theta_lb = (4/rho_min) max{2L^2/(n a), 2048 rho_t_max/(r gamma delta rho_min), L^2};
    alpha_ub = (r gamma delta/(256 theta)) min{rho_min^2/(rho_max^2 rho_t_max),
        rho_min^2/(sigma_A^2 rho_max rho_t_max), 1/(72 n a rho_t_max),
        rho_min/(2 rho_t_max a)}  with theta = theta_multiplier * theta_lb.

    A zero activation variance drops its term from the min (no randomness
    to control).
    """
    if min(L, a, gamma, delta, r) <= 0 or n < 1:
        raise InvalidConfigError("all step-size inputs must be positive")
    if delta > 1.0:
        raise InvalidConfigError("delta must lie in (0, 1]")
    if theta_multiplier < 1.0:
        raise InvalidConfigError("theta_multiplier must be >= 1 to keep theta >= theta_lb")
    rho_min, rho_max = constants.rho_min, constants.rho_max
    rho_t_max = constants.rho_t_max
    if min(rho_min, rho_max, rho_t_max) <= 0:
        raise AssumptionViolationError("spectral constants must be positive")

    eta = r * gamma * delta / (8.0 * rho_t_max)
    theta_lb = (4.0 / rho_min) * max(
        2.0 * L**2 / (n * a),
        2048.0 * rho_t_max / (r * gamma * delta * rho_min),
        L**2,
    )
    theta = theta_multiplier * theta_lb
    terms = [
        rho_min**2 / (rho_max**2 * rho_t_max),
        1.0 / (72.0 * n * a * rho_t_max),
        rho_min / (2.0 * rho_t_max * a),
    ]
    if constants.sigma_a_sq > 0:
        terms.append(rho_min**2 / (constants.sigma_a_sq * rho_max * rho_t_max))
    alpha_ub = (r * gamma * delta / (256.0 * theta)) * min(terms)
    return StepSizePlan(eta=eta, theta_lb=theta_lb, alpha_ub=alpha_ub, theta=theta)


def rate_regime_a(regime: str, T: int) -> float:
    """Named presets for the free constant in the step-size rule."""
    if regime == "noiseless_stochastic":
        return 1.0 / math.sqrt(T)
    if regime == "noisy":
        return T ** (-1.0 / 3.0)
    if regime == "constant":
        return 1.0
    raise InvalidConfigError(f"unknown rate regime {regime!r}")
