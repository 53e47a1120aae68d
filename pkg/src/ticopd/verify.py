"""Runnable invariant suite: every structural property the modules promise,
checked with measured values and explicit thresholds.

The suite is what `ticopd verify` executes; the same check functions back
the test suite so a failure is reproducible in isolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import algorithms as alg
from . import objectives as obj
from .compression import (ChannelSpec, CompressorSpec, bits_per_message,
                          contraction_estimate, qsgd, qsgd_tau, transmit)
from .config import ExperimentConfig, ProblemConfig, ParamsConfig, CompressorConfig, \
    ChannelConfig, ActivationConfig, GraphConfig
from .graphs import (ActivationPolicy, EdgeActivation, build_er_graph, complete_graph,
                     incidence_apply, path_graph, sample_activation, spectral_constants)
from .metrics import consensus_error
from .runner import run_single


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: float
    threshold: float
    note: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"[{status}] {self.name}: measured={self.measured:.3e} "
                f"threshold={self.threshold:.3e}{' -- ' + self.note if self.note else ''}")


def _chi2_critical(df: int, alpha: float = 1e-3) -> float:
    """Wilson-Hilferty approximation of the chi-square upper quantile."""
    from statistics import NormalDist
    z = NormalDist().inv_cdf(1.0 - alpha)
    return df * (1.0 - 2.0 / (9.0 * df) + z * math.sqrt(2.0 / (9.0 * df))) ** 3


# ---------------------------------------------------------------------------
# graph checks

def check_incidence_antisymmetry(rng) -> CheckResult:
    worst = 0.0
    for _ in range(20):
        g = build_er_graph(8, 0.5, int(rng.integers(1 << 30)))
        X = rng.standard_normal((g.n, 5))
        policy = ActivationPolicy("bernoulli", edge_probs=0.6)
        act = sample_activation(g, policy, rng)
        out = incidence_apply(g, act, X)
        scale = max(1.0, float(np.max(np.abs(out))))
        worst = max(worst, float(np.max(np.abs(out.sum(axis=0)))) / scale)
    return CheckResult("graph.incidence_rows_sum_zero", worst <= 1e-12, worst, 1e-12)


def check_incidence_consensual(rng) -> CheckResult:
    g = build_er_graph(6, 0.7, 1)
    X = np.tile(rng.standard_normal(4), (g.n, 1))
    act = EdgeActivation(tuple(range(g.n_edges)))
    out = incidence_apply(g, act, X)
    worst = float(np.max(np.abs(out)))
    return CheckResult("graph.consensual_input_maps_to_zero", worst == 0.0, worst, 0.0)


def check_fullgraph_rho_match(rng) -> CheckResult:
    g = build_er_graph(9, 0.5, 4)
    c = spectral_constants(g, ActivationPolicy("full"), rng=rng)
    gap = max(abs(c.rho_min - c.rho_t_min), abs(c.rho_max - c.rho_t_max))
    return CheckResult("graph.fullgraph_rho_equals_rho_tilde", gap <= 1e-9, gap, 1e-9)


def check_rho_min_positive(rng) -> CheckResult:
    worst = math.inf
    for kind in ("full", "single_edge", "broadcast_star"):
        g = build_er_graph(7, 0.4, 11)
        c = spectral_constants(g, ActivationPolicy(kind), rng=rng)
        worst = min(worst, c.rho_min)
    return CheckResult("graph.rho_min_positive", worst > 1e-10, worst, 1e-10)


def check_activation_frequencies(rng, draws: int = 100_000) -> CheckResult:
    """Chi-square goodness of fit of single-edge sampling against 1/|E|."""
    g = build_er_graph(6, 0.6, 2)
    policy = ActivationPolicy("single_edge")
    counts = np.zeros(g.n_edges)
    for _ in range(draws):
        counts[sample_activation(g, policy, rng).active[0]] += 1
    expected = draws / g.n_edges
    stat = float(np.sum((counts - expected) ** 2 / expected))
    crit = _chi2_critical(g.n_edges - 1)
    return CheckResult("graph.single_edge_frequencies_chi2", stat <= crit, stat, crit)


def check_broadcast_star_probs(rng, draws: int = 100_000) -> CheckResult:
    """Empirical edge inclusion under broadcast_star vs the exact 2/n."""
    g = build_er_graph(6, 0.6, 2)
    policy = ActivationPolicy("broadcast_star")
    counts = np.zeros(g.n_edges)
    for _ in range(draws):
        for e in sample_activation(g, policy, rng).active:
            counts[e] += 1
    p = 2.0 / g.n
    se = math.sqrt(p * (1 - p) / draws)
    worst = float(np.max(np.abs(counts / draws - p)))
    return CheckResult("graph.broadcast_star_inclusion_probs", worst <= 4 * se, worst, 4 * se)


# ---------------------------------------------------------------------------
# compression checks

def check_qsgd_contraction(rng) -> CheckResult:
    d, s, trials = 100, 16, 10_000
    est = contraction_estimate(CompressorSpec("qsgd", s=s), d, trials, rng)
    delta = 1.0 / (2.0 * qsgd_tau(d, s))
    bound = (1.0 - delta) ** 2 + 3.0 * est.stderr
    return CheckResult("compression.qsgd_contraction", est.ratio <= bound, est.ratio, bound)


def check_topk_contraction(rng) -> CheckResult:
    d, k = 50, 5
    spec = CompressorSpec("top_k", k=k)
    worst = 0.0
    for _ in range(10_000):
        x = rng.standard_normal(d)
        from .compression import top_k
        err = x - top_k(x, k)
        worst = max(worst, (err @ err) / (x @ x))
    bound = 1.0 - k / d
    return CheckResult("compression.topk_per_vector_bound",
                       worst <= bound * (1 + 1e-12), worst, bound)


def check_qsgd_homogeneity(rng) -> CheckResult:
    """qsgd(c x) = c qsgd(x) for matched dithering draws; c a power of two
    keeps the identity exact in floating point."""
    d, s, c = 64, 8, 2.0
    x = rng.standard_normal(d)
    seed = int(rng.integers(1 << 30))
    a = qsgd(c * x, s, np.random.default_rng(seed))
    b = c * qsgd(x, s, np.random.default_rng(seed))
    gap = float(np.max(np.abs(a - b)))
    return CheckResult("compression.qsgd_positive_homogeneity", gap == 0.0, gap, 0.0)


def check_channel_energy(rng) -> CheckResult:
    d, sigma, trials = 25, 0.01, 10_000
    comp, chan = CompressorSpec("identity"), ChannelSpec(sigma_xi=sigma)
    sq = np.empty(trials)
    for t in range(trials):
        msg = transmit(np.zeros(d), comp, chan, rng)
        sq[t] = msg.payload @ msg.payload
    se = float(sq.std(ddof=1) / math.sqrt(trials))
    gap = abs(float(sq.mean()) - sigma**2)
    return CheckResult("compression.channel_noise_energy", gap <= 3 * se, gap, 3 * se)


def check_bits_formula(rng) -> CheckResult:
    ok = (bits_per_message(CompressorSpec("qsgd", s=16), 1000) == 5032
          and bits_per_message(CompressorSpec("top_k", k=10), 1000) == 640
          and bits_per_message(CompressorSpec("identity"), 100) == 3200)
    return CheckResult("compression.bit_formulas", ok, float(ok), 1.0)


# ---------------------------------------------------------------------------
# objective checks

def check_finite_differences(rng) -> CheckResult:
    cases = [
        (obj.make_tiny_quadratic(3, 2, seed=5), 1e-5, 1e-6),
        (obj.make_linreg(4, 10, 8, seed=5), 1e-5, 1e-5),
        (obj.make_sigmoid(3, 12, 6, classes=3, seed=5), 1e-4, 1e-4),
    ]
    worst_ratio = 0.0
    for problem, h, tol in cases:
        x = rng.standard_normal(problem.d)
        err = obj.finite_diff_check(problem, agent=1, x=x, h=h)
        worst_ratio = max(worst_ratio, err / tol)
    return CheckResult("objectives.finite_difference_gradients", worst_ratio <= 1.0,
                       worst_ratio, 1.0, note="max error / per-family tolerance")


def check_minibatch_unbiased(rng) -> CheckResult:
    problem = obj.make_linreg(3, 12, 6, seed=9)
    x = rng.standard_normal(problem.d)
    exact = problem.local_grad_full(0, x)
    draws = np.stack([
        obj.local_grad(problem, 0, x, batch=3, rng=rng).value for _ in range(10_000)])
    se = draws.std(axis=0, ddof=1) / math.sqrt(draws.shape[0])
    gap = np.abs(draws.mean(axis=0) - exact)
    worst = float(np.max(gap - 3 * se))
    return CheckResult("objectives.minibatch_unbiased", worst <= 0.0, worst, 0.0,
                       note="per-coordinate |mean - exact| - 3 SE")


def check_least_squares_stationarity(rng) -> CheckResult:
    problem = obj.make_linreg(seed=1)
    val = obj.global_grad_norm_sq(problem, problem.least_squares())
    return CheckResult("objectives.linreg_normal_equations", val < 1e-16, val, 1e-16)


def check_quadratic_minimizer(rng) -> CheckResult:
    problem = obj.make_tiny_quadratic(3, 2, seed=5)
    val = obj.global_grad_norm_sq(problem, problem.minimizer())
    return CheckResult("objectives.quadratic_closed_form_minimizer", val < 1e-24, val, 1e-24)


# ---------------------------------------------------------------------------
# algorithm checks

def _short_noisy_cfg(T: int = 300) -> ExperimentConfig:
    return ExperimentConfig(
        problem=ProblemConfig(kind="sigmoid", n=5, samples_per_agent=20, dim=10,
                              classes=3, seed=0, batch=1),
        graph=GraphConfig(n=5, p=0.6, seed=2),
        activation=ActivationConfig(kind="single_edge"),
        algorithm="ticopd",
        params=ParamsConfig(alpha=1e-3, eta=1e-3, theta=10.0, gamma=0.5),
        compressor=CompressorConfig(kind="qsgd", s=4),
        channel=ChannelConfig(sigma_xi=0.01),
        T=T, seeds=[7], stride=50,
    )


def check_dual_zero_sum(rng) -> CheckResult:
    res = run_single(_short_noisy_cfg(), seed=7)
    val = res.invariants["dual_sum_ratio"]
    return CheckResult("algorithms.dual_zero_sum", val <= 1e-9, val, 1e-9,
                       note="max_t ||sum_i lambda_i|| / max(1, ||Lambda||)")


def check_average_iterate_identity(rng) -> CheckResult:
    res = run_single(_short_noisy_cfg(), seed=7)
    val = res.invariants["avg_iterate_ratio"]
    return CheckResult("algorithms.average_iterate_identity", val <= 1e-10, val, 1e-10)


def check_replication_coherence(rng) -> CheckResult:
    res = run_single(_short_noisy_cfg(), seed=7)
    val = res.invariants["coherence_gap"]
    return CheckResult("algorithms.replication_coherence", val == 0.0, val, 0.0)


def check_edge_local_matches_global(rng) -> CheckResult:
    """Identity compressor, gamma=1, noiseless, full activation: both
    surrogate modes satisfy x_hat = X and produce identical trajectories."""
    problem = obj.make_tiny_quadratic(3, 2, seed=3)
    graph = complete_graph(3)
    policy = ActivationPolicy("full")
    gap = 0.0
    trajs = []
    for mode in (alg.EDGE_LOCAL, alg.GLOBAL):
        params = alg.TiCoPDParams(alpha=0.05, eta=0.1, theta=5.0, gamma=1.0,
                                  surrogate_mode=mode)
        state = alg.ticopd_init(problem, graph, np.arange(6, dtype=float).reshape(3, 2),
                                params)
        rngs = alg.rng_streams(0)
        xs = []
        for _ in range(50):
            state, _, _ = alg.ticopd_step(state, problem, graph, policy, params, rngs)
            xs.append(state.X.copy())
        trajs.append(np.stack(xs))
    gap = float(np.max(np.abs(trajs[0] - trajs[1])))
    return CheckResult("algorithms.edge_local_equals_global_identity", gap == 0.0, gap, 0.0)


def check_quadratic_stationarity(rng) -> CheckResult:
    """Exact gradients, identity compressor, noiseless full activation:
    the engine must drive both stationarity and consensus to numerical zero."""
    problem = obj.make_tiny_quadratic(3, 2, seed=5)
    graph = complete_graph(3)
    policy = ActivationPolicy("full")
    params = alg.TiCoPDParams(alpha=0.05, eta=0.05, theta=10.0, gamma=1.0)
    state = alg.ticopd_init(problem, graph, None, params)
    rngs = alg.rng_streams(1)
    for _ in range(4000):
        state, _, _ = alg.ticopd_step(state, problem, graph, policy, params, rngs)
    x_bar = state.X.mean(axis=0)
    val = max(obj.global_grad_norm_sq(problem, x_bar), consensus_error(state.X))
    return CheckResult("algorithms.quadratic_stationarity", val < 1e-12, val, 1e-12,
                       note="max(grad_norm_sq, consensus_err) after 4000 exact steps")


def check_metropolis_doubly_stochastic(rng) -> CheckResult:
    g = build_er_graph(8, 0.5, 6)
    worst = 0.0
    for _ in range(20):
        act = sample_activation(g, ActivationPolicy("broadcast_star"), rng)
        W = alg.metropolis_weights(g, act)
        worst = max(worst,
                    float(np.max(np.abs(W.sum(axis=0) - 1))),
                    float(np.max(np.abs(W.sum(axis=1) - 1))),
                    float(np.max(np.abs(W - W.T))))
    return CheckResult("algorithms.metropolis_doubly_stochastic", worst <= 1e-12, worst, 1e-12)


# ---------------------------------------------------------------------------
# metrics / harness checks

def check_bit_accounting(rng) -> CheckResult:
    """Single-edge activation sends exactly two messages per iteration."""
    cfg = _short_noisy_cfg(T=97)
    cfg = replace(cfg, stride=1)
    res = run_single(cfg, seed=3)
    per = 2 * bits_per_message(CompressorSpec("qsgd", s=4), cfg.problem.dim * cfg.problem.classes)
    gap = max(abs(r.cum_bits - per * r.t) for r in res.records)
    return CheckResult("metrics.bit_accounting_exact", gap == 0, float(gap), 0.0)


def check_recording_purity(rng) -> CheckResult:
    """Recording stride must not perturb the trajectory."""
    cfg = _short_noisy_cfg(T=150)
    a = run_single(replace(cfg, stride=1), seed=11)
    b = run_single(replace(cfg, stride=75), seed=11)
    gap = float(np.max(np.abs(a.final_state.X - b.final_state.X)))
    return CheckResult("metrics.recording_is_pure_observation", gap == 0.0, gap, 0.0)


def check_run_determinism(rng) -> CheckResult:
    cfg = _short_noisy_cfg(T=120)
    a = run_single(cfg, seed=13)
    b = run_single(cfg, seed=13)
    same = (a.records == b.records
            and np.array_equal(a.final_state.X, b.final_state.X))
    return CheckResult("harness.run_determinism", same, float(same), 1.0)


ALL_CHECKS = [
    check_incidence_antisymmetry,
    check_incidence_consensual,
    check_fullgraph_rho_match,
    check_rho_min_positive,
    check_activation_frequencies,
    check_broadcast_star_probs,
    check_qsgd_contraction,
    check_topk_contraction,
    check_qsgd_homogeneity,
    check_channel_energy,
    check_bits_formula,
    check_finite_differences,
    check_minibatch_unbiased,
    check_least_squares_stationarity,
    check_quadratic_minimizer,
    check_dual_zero_sum,
    check_average_iterate_identity,
    check_replication_coherence,
    check_edge_local_matches_global,
    check_quadratic_stationarity,
    check_metropolis_doubly_stochastic,
    check_bit_accounting,
    check_recording_purity,
    check_run_determinism,
]


def run_suite(seed: int = 0, checks=None) -> list[CheckResult]:
    results = []
    for fn in (checks or ALL_CHECKS):
        rng = np.random.default_rng(seed)  # fresh stream per check
        results.append(fn(rng))
    return results
