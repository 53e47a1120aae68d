"""Command-line interface: run / sweep / verify / plot.

Exit codes: 0 success, 1 run error, 2 config error, 3 verify-suite failure.
The default output directory comes from $TICOPD_OUT when --out is absent.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from .config import ExperimentConfig, list_presets, load_config, load_preset
from .errors import InvalidConfigError, InvalidInputError
from .plotting import X_AXES, Y_AXES, plot_traces, render_run_figures
from .runner import SWEEP_AXES, run, sweep
from .verify import run_suite

EXIT_OK = 0
EXIT_RUN = 1
EXIT_CONFIG = 2
EXIT_VERIFY = 3


def _add_config_args(sub):
    sub.add_argument("--preset", help="named preset shipped with the package")
    sub.add_argument("--config", help="path to a YAML/JSON experiment config")
    sub.add_argument("--seed", type=int, help="run a single seed instead of the config's list")
    sub.add_argument("--out", help="output directory (default: config value or $TICOPD_OUT)")


def _resolve_config(args) -> ExperimentConfig:
    if bool(args.preset) == bool(args.config):
        raise InvalidConfigError("exactly one of --preset or --config is required")
    cfg = load_preset(args.preset) if args.preset else load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seeds=[args.seed])
    out = args.out or os.environ.get("TICOPD_OUT")
    if out:
        cfg = replace(cfg, out=out)
    return cfg


def _cmd_run(args) -> int:
    cfg = _resolve_config(args)
    payload = run(cfg)
    if not args.no_figures:
        render_run_figures(cfg.out, cfg.algorithm, cfg.seeds)
    agg = payload["aggregate"]
    print(f"wrote {len(cfg.seeds)} run(s) to {cfg.out}")
    print(f"  avg grad_norm_sq : {agg['avg_grad_norm_sq']['mean']:.6e} "
          f"+/- {agg['avg_grad_norm_sq']['std']:.2e}")
    print(f"  final consensus  : {agg['final_consensus_err']['mean']:.6e} "
          f"+/- {agg['final_consensus_err']['std']:.2e}")
    print(f"  total bits       : {agg['total_bits']['mean']:.4g}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = _resolve_config(args)
    values = None
    if args.axis != "seeds":
        if not args.values:
            raise InvalidConfigError(f"--values is required for axis {args.axis!r}")
        values = [float(v) for v in args.values.split(",") if v.strip()]
        if not values:
            raise InvalidConfigError("--values parsed to an empty list")
    comparison = sweep(cfg, args.axis, values)
    print(f"swept {args.axis} over {len(comparison)} point(s); "
          f"comparison in {cfg.out}/sweep_comparison.json")
    for label, agg in comparison.items():
        print(f"  {label}: final consensus {agg['final_consensus_err']['mean']:.6e}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    results = run_suite(seed=args.seed if args.seed is not None else 0)
    failed = 0
    for res in results:
        print(res.line())
        failed += not res.passed
    print(f"{len(results) - failed}/{len(results)} invariant checks passed")
    return EXIT_VERIFY if failed else EXIT_OK


def _cmd_plot(args) -> int:
    out = args.out or os.environ.get("TICOPD_OUT", "plot.pdf")
    target = plot_traces(args.traces, args.x, args.y, out)
    print(f"wrote {target}")
    return EXIT_OK


def _cmd_presets(args) -> int:
    for name in list_presets():
        print(name)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ticopd",
        description="Deterministic simulator for decentralized optimization "
                    "over compressed, noisy, randomly activated networks.")
    subs = parser.add_subparsers(dest="command", required=True)

    p_run = subs.add_parser("run", help="execute one experiment config over its seeds")
    _add_config_args(p_run)
    p_run.add_argument("--no-figures", action="store_true",
                       help="skip rendering the report figures next to the traces")
    p_run.set_defaults(fn=_cmd_run)

    p_sweep = subs.add_parser("sweep", help="run a config across an axis of values")
    _add_config_args(p_sweep)
    p_sweep.add_argument("--axis", required=True, choices=SWEEP_AXES)
    p_sweep.add_argument("--values", help="comma-separated axis values (not for 'seeds')")
    p_sweep.set_defaults(fn=_cmd_sweep)

    p_verify = subs.add_parser("verify", help="run the invariant suite")
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.set_defaults(fn=_cmd_verify)

    p_plot = subs.add_parser("plot", help="render trace CSVs as a vector line chart")
    p_plot.add_argument("traces", nargs="+", help="trace CSV files")
    p_plot.add_argument("--x", default="iterations", choices=sorted(X_AXES))
    p_plot.add_argument("--y", default="grad_norm_sq", choices=sorted(Y_AXES))
    p_plot.add_argument("--out", help="output figure path (.pdf or .svg)")
    p_plot.set_defaults(fn=_cmd_plot)

    p_presets = subs.add_parser("presets", help="list shipped presets")
    p_presets.set_defaults(fn=_cmd_presets)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (InvalidConfigError, InvalidInputError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"run error: {exc}", file=sys.stderr)
        return EXIT_RUN


if __name__ == "__main__":
    sys.exit(main())
