"""Figure rendering for trace files: log-scale convergence charts emitted
as vector graphics (PDF/SVG by extension), with date metadata stripped so
output files stay byte-reproducible."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .errors import InvalidConfigError, InvalidInputError  # noqa: E402
from .metrics import read_trace_csv  # noqa: E402

X_AXES = {"iterations": ("t", "iteration"), "bits": ("cum_bits", "bits transmitted")}
Y_AXES = {
    "grad_norm_sq": "squared gradient norm at the network average",
    "consensus_err": "consensus error",
    "loss": "global loss at the network average",
}


def _metadata(path: Path) -> dict:
    if path.suffix == ".pdf":
        return {"CreationDate": None}
    if path.suffix == ".svg":
        return {"Date": None}
    return {}


def plot_traces(trace_paths, x_axis: str = "iterations", y_axis: str = "grad_norm_sq",
                out_path: str | Path = "plot.pdf", logy: bool = True) -> Path:
    """One line per trace file, legend from file stems, log-scale y."""
    if not trace_paths:
        raise InvalidInputError("need at least one trace file to plot")
    if x_axis not in X_AXES:
        raise InvalidConfigError(f"x axis must be one of {sorted(X_AXES)}")
    if y_axis not in Y_AXES:
        raise InvalidConfigError(f"y axis must be one of {sorted(Y_AXES)}")

    col, xlabel = X_AXES[x_axis]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for path in trace_paths:
        cols = read_trace_csv(path)
        ax.plot(cols[col], cols[y_axis], label=Path(path).stem, linewidth=1.2)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(Y_AXES[y_axis])
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()

    out = Path(out_path)
    if out.suffix not in (".pdf", ".svg"):
        out = out.with_suffix(".pdf")
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, metadata=_metadata(out))
    plt.close(fig)
    return out


def render_run_figures(out_dir: str | Path, algorithm: str, seeds) -> list[Path]:
    """Standard report figures next to the delimited output of a run set."""
    out = Path(out_dir)
    traces = [out / f"{algorithm}_{seed}.csv" for seed in seeds]
    made = []
    for x_axis, y_axis in (("bits", "grad_norm_sq"), ("iterations", "grad_norm_sq"),
                           ("iterations", "consensus_err")):
        target = out / f"{algorithm}_{y_axis}_vs_{x_axis}.pdf"
        made.append(plot_traces(traces, x_axis, y_axis, target))
    return made
