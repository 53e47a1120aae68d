"""Experiment execution: config -> deterministic runs -> trace/summary files."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import algorithms as alg
from . import objectives as obj
from .compression import ChannelSpec, CompressorSpec
from .config import ExperimentConfig
from .errors import InvalidConfigError
from .graphs import (ActivationPolicy, Graph, build_er_graph, graph_from_edge_text,
                     spectral_constants)
from .metrics import Recorder, RunSummary, summarize, write_summary_json, write_trace_csv


def build_problem(cfg: ExperimentConfig) -> obj.Problem:
    p = cfg.problem
    if p.kind == "linreg":
        return obj.make_linreg(n=p.n, m_per_agent=p.samples_per_agent, d=p.dim, seed=p.seed)
    if p.kind == "sigmoid":
        return obj.make_sigmoid(n=p.n, m_per_agent=p.samples_per_agent, feat_d=p.dim,
                                classes=p.classes, seed=p.seed, reg=p.reg)
    return obj.make_tiny_quadratic(n=p.n, d=p.dim, seed=p.seed)


def build_graph(cfg: ExperimentConfig) -> Graph:
    g = cfg.graph
    if g.edges:
        return graph_from_edge_text(g.n, g.edges)
    return build_er_graph(g.n, g.p, g.seed)


def build_policy(cfg: ExperimentConfig) -> ActivationPolicy:
    a = cfg.activation
    probs = tuple(a.edge_prob) if isinstance(a.edge_prob, list) else a.edge_prob
    return ActivationPolicy(kind=a.kind, edge_probs=probs)


def build_compressor(cfg: ExperimentConfig) -> CompressorSpec:
    c = cfg.compressor
    return CompressorSpec(kind=c.kind, s=c.s, k=c.k, r=c.r)


def build_channel(cfg: ExperimentConfig) -> ChannelSpec:
    return ChannelSpec(sigma_xi=cfg.channel.sigma_xi, mode=cfg.channel.mode)


def resolve_ticopd_params(cfg: ExperimentConfig, problem: obj.Problem,
                          graph: Graph, policy: ActivationPolicy) -> alg.TiCoPDParams:
    p = cfg.params
    comp = build_compressor(cfg)
    chan = build_channel(cfg)
    if p.from_theorem is not None:
        thm = p.from_theorem
        consts = spectral_constants(graph, policy, rng=np.random.default_rng(cfg.graph.seed))
        L = obj.smoothness_constant(problem)
        plan = alg.theorem_step_sizes(
            consts, L=L, n=problem.n, a=thm.a, gamma=thm.gamma,
            delta=comp.delta(problem.d), r=comp.r,
            theta_multiplier=thm.theta_multiplier)
        alpha = thm.alpha_fraction * plan.alpha_ub
        eta, theta, gamma = plan.eta, plan.theta, thm.gamma
    else:
        alpha, eta, theta, gamma = p.alpha, p.eta, p.theta, p.gamma
    return alg.TiCoPDParams(
        alpha=alpha, eta=eta, theta=theta, gamma=gamma,
        compressor=comp, channel=chan,
        surrogate_mode=p.surrogate_mode, message_timing=p.message_timing,
        batch=cfg.problem.batch, alpha_schedule=p.schedule,
        schedule_total=cfg.T, schedule_warmup=p.warmup)


@dataclass
class RunResult:
    seed: int
    records: list
    summary: RunSummary
    final_state: object
    invariants: dict
    params: object


def run_single(cfg: ExperimentConfig, seed: int,
               problem: obj.Problem | None = None,
               graph: Graph | None = None) -> RunResult:
    """One deterministic run; the problem/graph can be shared across seeds."""
    problem = build_problem(cfg) if problem is None else problem
    graph = build_graph(cfg) if graph is None else graph
    policy = build_policy(cfg)
    rngs = alg.rng_streams(seed)

    if cfg.algorithm == "ticopd":
        params = resolve_ticopd_params(cfg, problem, graph, policy)
        state = alg.ticopd_init(problem, graph, None, params)
        step = lambda st: alg.ticopd_step(st, problem, graph, policy, params, rngs)
    elif cfg.algorithm == "choco_sgd":
        params = alg.ChocoParams(
            eta=cfg.params.eta, gamma=cfg.params.gamma,
            compressor=build_compressor(cfg), channel=build_channel(cfg),
            batch=cfg.problem.batch, eta_schedule=cfg.params.schedule,
            schedule_total=cfg.T, schedule_warmup=cfg.params.warmup)
        state = alg.choco_init(problem, None)
        step = lambda st: alg.choco_sgd_step(st, problem, graph, policy, params, rngs)
    else:
        params = alg.DsgdParams(
            alpha=cfg.params.alpha, batch=cfg.problem.batch,
            alpha_schedule=cfg.params.schedule,
            schedule_total=cfg.T, schedule_warmup=cfg.params.warmup)
        state = alg.dsgd_init(problem, None)
        step = lambda st: alg.dsgd_step(st, problem, graph, policy, params, rngs)

    start = time.perf_counter_ns()
    clock = (lambda: time.perf_counter_ns() - start) if cfg.timing else None
    recorder = Recorder(stride=cfg.stride, clock=clock)

    cum_bits = 0
    completed = 0
    inv = {"dual_sum_ratio": 0.0, "avg_iterate_ratio": 0.0, "coherence_gap": 0.0}
    for t in range(cfg.T):
        recorder.record(t, state.X, problem, cum_bits)
        state, bits, diag = step(state)
        cum_bits += bits
        completed = t + 1
        if "dual_sum_norm" in diag:
            lam = max(1.0, diag["lambda_norm"])
            inv["dual_sum_ratio"] = max(inv["dual_sum_ratio"], diag["dual_sum_norm"] / lam)
            inv["avg_iterate_ratio"] = max(
                inv["avg_iterate_ratio"],
                diag["avg_iterate_residual"] / diag["avg_iterate_scale"])
            inv["coherence_gap"] = max(inv["coherence_gap"], diag["coherence_gap"])
        if cfg.max_bits is not None and cum_bits >= cfg.max_bits:
            break

    return RunResult(seed=seed, records=recorder.records,
                     summary=summarize(recorder.records, total_iterations=completed),
                     final_state=state, invariants=inv, params=params)


def run(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> dict:
    """Execute every seed, write `<algo>_<seed>.csv|.json` plus an aggregate
    JSON with across-seed mean/std of the summary fields."""
    out = Path(out_dir if out_dir is not None else cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    problem = build_problem(cfg)
    graph = build_graph(cfg)

    effective = cfg.to_dict()
    effective["graph"]["edges"] = graph.to_edge_text()  # pin the realized topology

    summaries = []
    for seed in cfg.seeds:
        res = run_single(cfg, seed, problem=problem, graph=graph)
        base = out / f"{cfg.algorithm}_{seed}"
        write_trace_csv(base.with_suffix(".csv"), res.records)
        write_summary_json(base.with_suffix(".json"), res.summary,
                           extra={"seed": seed, "config": effective,
                                  "invariants": res.invariants})
        summaries.append(res.summary)

    agg = aggregate_summaries(summaries)
    agg_payload = {"algorithm": cfg.algorithm, "seeds": list(cfg.seeds),
                   "aggregate": agg, "config": effective}
    agg_path = out / f"{cfg.algorithm}_aggregate.json"
    with open(agg_path, "w") as fh:
        json.dump(agg_payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return agg_payload


def aggregate_summaries(summaries: list[RunSummary]) -> dict:
    fields = ("avg_grad_norm_sq", "min_grad_norm_sq", "final_consensus_err",
              "avg_consensus_err", "total_bits", "T")
    agg = {}
    for name in fields:
        vals = np.array([getattr(s, name) for s in summaries], dtype=float)
        agg[name] = {"mean": float(vals.mean()),
                     "std": float(vals.std(ddof=1)) if vals.size > 1 else 0.0}
    return agg


SWEEP_AXES = ("sigma_xi", "gamma", "seeds")


def sweep(cfg: ExperimentConfig, axis: str, values: list | None = None,
          out_dir: str | Path | None = None) -> dict:
    """Run one point per axis value (or seeds-only) and write a comparison
    JSON keyed by axis value."""
    if axis not in SWEEP_AXES:
        raise InvalidConfigError(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")
    out = Path(out_dir if out_dir is not None else cfg.out)
    out.mkdir(parents=True, exist_ok=True)

    if axis == "seeds":
        points = [("seeds", None)]
    else:
        if not values:
            raise InvalidConfigError(f"sweep axis {axis!r} needs a nonempty value list")
        points = [(f"{axis}={v:g}", v) for v in values]

    comparison = {}
    for label, value in points:
        point_cfg = cfg
        if axis == "sigma_xi":
            point_cfg = replace(cfg, channel=replace(cfg.channel, sigma_xi=value))
        elif axis == "gamma":
            point_cfg = replace(cfg, params=replace(cfg.params, gamma=value))
        payload = run(point_cfg, out / label)
        comparison[label] = payload["aggregate"]

    cmp_path = out / "sweep_comparison.json"
    with open(cmp_path, "w") as fh:
        json.dump({"axis": axis, "points": comparison}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return comparison
