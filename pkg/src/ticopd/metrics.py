"""Per-iteration measurement, trace recording, and summaries.

Traces always report the exact full-batch gradient of the global objective
at the network average, independently of whatever stochastic oracle the
algorithm consumes, plus the consensus error and cumulative transmitted
bits.  Recording never touches algorithm state or rng streams.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidInputError
from .objectives import Problem, global_grad_norm_sq, global_loss

CSV_HEADER = ("t", "grad_norm_sq", "consensus_err", "cum_bits", "loss", "wall_ns")


def consensus_error(X: np.ndarray) -> float:
    """sum_i ||x_i - mean row||^2."""
    X = np.atleast_2d(X)
    dev = X - X.mean(axis=0)
    return float(np.sum(dev * dev))


@dataclass(frozen=True)
class TraceRecord:
    t: int
    grad_norm_sq: float
    consensus_err: float
    cum_bits: int
    loss: float
    wall_ns: int


@dataclass(frozen=True)
class RunSummary:
    """Arithmetic summaries over the recorded iterations (uniform weights
    over records, i.e. over the stride-subsampled iterations)."""

    avg_grad_norm_sq: float
    min_grad_norm_sq: float
    final_consensus_err: float
    avg_consensus_err: float
    total_bits: int
    T: int


class Recorder:
    """Collects one TraceRecord every `stride` iterations.

    Timing is opt-in: with timing disabled wall_ns is written as 0 so that
    repeated runs of the same (config, seed) produce byte-identical traces.
    """

    def __init__(self, stride: int = 1, clock=None):
        if stride < 1:
            raise InvalidInputError(f"stride must be >= 1, got {stride}")
        self.stride = stride
        self.records: list[TraceRecord] = []
        self._clock = clock

    def wants(self, t: int) -> bool:
        return t % self.stride == 0

    def record(self, t: int, X: np.ndarray, problem: Problem, cum_bits: int) -> TraceRecord | None:
        if not self.wants(t):
            return None
        x_bar = X.mean(axis=0)
        rec = TraceRecord(
            t=t,
            grad_norm_sq=global_grad_norm_sq(problem, x_bar),
            consensus_err=consensus_error(X),
            cum_bits=int(cum_bits),
            loss=global_loss(problem, x_bar),
            wall_ns=int(self._clock()) if self._clock is not None else 0,
        )
        self.records.append(rec)
        return rec


def record(state, problem: Problem, cum_bits: int, recorder: Recorder) -> TraceRecord | None:
    """Record the current state if the recorder's stride selects it."""
    return recorder.record(state.t, state.X, problem, cum_bits)


def summarize(records: list[TraceRecord], total_iterations: int | None = None) -> RunSummary:
    if not records:
        raise InvalidInputError("cannot summarize an empty trace")
    grad = np.array([r.grad_norm_sq for r in records])
    cons = np.array([r.consensus_err for r in records])
    return RunSummary(
        avg_grad_norm_sq=float(grad.mean()),
        min_grad_norm_sq=float(grad.min()),
        final_consensus_err=float(cons[-1]),
        avg_consensus_err=float(cons.mean()),
        total_bits=records[-1].cum_bits,
        T=records[-1].t + 1 if total_iterations is None else total_iterations,
    )


def tail_average(values, frac: float = 0.1) -> float:
    """Mean of the last `frac` fraction of a series (at least one entry)."""
    values = np.asarray(values, dtype=float)
    k = max(1, int(round(frac * values.size)))
    return float(values[-k:].mean())


# ---------------------------------------------------------------------------
# serialization

def write_trace_csv(path, records: list[TraceRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for r in records:
            w.writerow([r.t, _fmt(r.grad_norm_sq), _fmt(r.consensus_err),
                        r.cum_bits, _fmt(r.loss), r.wall_ns])


def _fmt(v: float) -> str:
    # fixed round-trippable formatting keeps traces byte-reproducible
    return format(v, ".17g")


def read_trace_csv(path) -> dict[str, np.ndarray]:
    """Columns of a trace file keyed by header name."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_HEADER:
            raise InvalidInputError(f"{path}: bad trace header {header}")
        rows = []
        for ln, row in enumerate(reader, start=2):
            if len(row) != len(CSV_HEADER):
                raise InvalidInputError(f"{path}: malformed row {ln}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise InvalidInputError(f"{path}: malformed row {ln}: {exc}") from None
    if not rows:
        raise InvalidInputError(f"{path}: empty trace")
    cols = np.asarray(rows).T
    return {name: cols[k] for k, name in enumerate(CSV_HEADER)}


def summary_to_dict(summary: RunSummary) -> dict:
    return asdict(summary)


def write_summary_json(path, summary: RunSummary, extra: dict | None = None) -> None:
    payload = summary_to_dict(summary)
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
