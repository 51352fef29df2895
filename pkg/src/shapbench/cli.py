"""Command-line entry point: ``shapbench run | sweep-samples | sweep-features | report``.

Exit codes: 0 success, 2 configuration error, 3 partial failure (some cells errored).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 2, 3
DEFAULT_CACHE = ".shapbench_cache"


def _pin_threads() -> None:
    # timing runs single-threaded; set before numpy loads BLAS where possible
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, "1")
    try:
        from threadpoolctl import threadpool_limits

        threadpool_limits(1)
    except ImportError:
        pass


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in _csv_list(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON document mirroring BenchmarkConfig; flags override it")
    p.add_argument("--explainers", type=_csv_list)
    p.add_argument("--datasets", type=_csv_list)
    p.add_argument("--seed", type=int)
    p.add_argument("--background-size", type=int)
    p.add_argument("--out", type=Path, help="run directory")
    p.add_argument("--cache-dir", type=Path, default=Path(DEFAULT_CACHE),
                   help=f"model and ground-truth cache (default {DEFAULT_CACHE})")
    p.add_argument("--no-cache", action="store_true")
    p.add_argument("--wall-time-plots", action="store_true",
                   help="also emit plots with measured wall time on the cost axis (not reproducible)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shapbench", description="Benchmark Shapley value estimators.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="full benchmark: ground truth, explainers, metrics, sweeps, plots")
    _common(run)
    run.add_argument("--metrics", type=_csv_list)
    run.add_argument("--ground-truth", help="auto, exact or unbiased-ks[:n]")
    run.add_argument("--num-samples", type=int)
    run.add_argument("--no-sweeps", action="store_true")
    run.add_argument("--sweep-max", type=int)
    run.add_argument("--sweep-interval", type=int)
    run.add_argument("--sweep-method", choices=("random", "first-k"))
    run.add_argument("--sweep-m", type=_int_list)

    ss = sub.add_parser("sweep-samples", help="inference cost vs number of explained instances")
    _common(ss)
    ss.add_argument("--max", type=int, default=None)
    ss.add_argument("--interval", type=int, default=None)
    ss.add_argument("--method", choices=("random", "first-k"), default=None)

    sf = sub.add_parser("sweep-features", help="inference cost vs number of features on linear synthetics")
    _common(sf)
    sf.add_argument("--m", type=_int_list, default=None)
    sf.add_argument("--n-instances", type=int, default=None)

    rep = sub.add_parser("report", help="print the results table of a finished run")
    rep.add_argument("--table", type=Path, required=True, help="run directory")
    rep.add_argument("--dataset", required=True)
    rep.add_argument("--plots", action="store_true", help="regenerate plots/ from the report")
    rep.add_argument("--precision", type=int, default=6)
    return parser


def _load_config(args):
    from shapbench.bench import BenchmarkConfig, ConfigError

    if args.config is not None:
        try:
            doc = json.loads(args.config.read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a JSON object")
        cfg = BenchmarkConfig.from_dict(doc)
    else:
        cfg = BenchmarkConfig()
    for flag, attr in (("explainers", "explainers"), ("datasets", "datasets"), ("seed", "seed"),
                       ("background_size", "background_size"), ("metrics", "metrics"),
                       ("ground_truth", "ground_truth"), ("num_samples", "num_samples")):
        value = getattr(args, flag, None)
        if value is not None:
            setattr(cfg, attr, value)
    return cfg


def _cache(args):
    return None if args.no_cache else args.cache_dir


def _cmd_run(args) -> int:
    from shapbench import bench, viz

    cfg = _load_config(args)
    if args.no_sweeps:
        cfg.samples_sweep = cfg.features_sweep = None
    else:
        if cfg.samples_sweep is not None:
            s = cfg.samples_sweep
            s.max = args.sweep_max if args.sweep_max is not None else s.max
            s.interval = args.sweep_interval if args.sweep_interval is not None else s.interval
            s.method = args.sweep_method or s.method
        if cfg.features_sweep is not None and args.sweep_m:
            cfg.features_sweep.m_list = args.sweep_m
    cfg.validate()
    out = args.out or Path("shapbench_run")
    report = bench.run(cfg, out, _cache(args))
    if args.wall_time_plots:
        viz.plots_from_report(report, out / "plots", with_wall_time=True)
    for name in report.data["datasets"]:
        print(f"== {name} ==")
        print(bench.print_results(report, name))
        print()
    print(f"report: {out / 'report.json'}")
    print(f"report sha256: {report.report_hash()}")
    return EXIT_PARTIAL if bench.has_errors(report) else EXIT_OK


def _sweep_only(args, which: str) -> int:
    from shapbench import bench, viz

    cfg = _load_config(args)
    cfg.samples_sweep = cfg.samples_sweep or bench.SamplesSweep()
    cfg.features_sweep = cfg.features_sweep or bench.FeaturesSweep()
    if which == "samples":
        s = cfg.samples_sweep
        s.max = args.max if args.max is not None else s.max
        s.interval = args.interval if args.interval is not None else s.interval
        s.method = args.method or s.method
        cfg.features_sweep = None
    else:
        if args.m:
            cfg.features_sweep.m_list = args.m
        if args.n_instances is not None:
            cfg.features_sweep.n_instances = args.n_instances
        cfg.samples_sweep = None
    cfg.validate()
    out = args.out or Path(f"shapbench_sweep_{which}")
    report = bench.run_sweep(cfg, which, out, _cache(args))
    viz.plots_from_report(report, out / "plots", with_wall_time=args.wall_time_plots)
    sw = report.data["sweeps"][which]
    xs = sw["counts"] if which == "samples" else sw["m_list"]
    print(f"{which} sweep over {xs}")
    for name, series in sw["series"].items():
        print(f"  {name}: rows evaluated {series['inference_rows']}")
        for m, reason in series.get("skipped", {}).items():
            print(f"    M={m} skipped: {reason}")
    if sw.get("with_replacement"):
        print("  note: instances drawn with replacement (max exceeds the validation set)")
    print(f"report: {out / 'report.json'}")
    return EXIT_OK


def _cmd_report(args) -> int:
    from shapbench import bench, viz
    from shapbench.bench import ConfigError

    if not (args.table / "report.json").exists():
        raise ConfigError(f"no report.json in {args.table}")
    report = bench.BenchmarkReport.load(args.table)
    try:
        print(bench.print_results(report, args.dataset, args.precision))
    except KeyError as exc:
        raise ConfigError(exc.args[0]) from None
    if args.plots:
        viz.plots_from_report(report, args.table / "plots")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    _pin_threads()
    from shapbench.bench import ConfigError
    from shapbench.data import DataFormatError

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    handlers = {
        "run": _cmd_run,
        "sweep-samples": lambda a: _sweep_only(a, "samples"),
        "sweep-features": lambda a: _sweep_only(a, "features"),
        "report": _cmd_report,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, DataFormatError, FileNotFoundError) as exc:
        print(f"shapbench: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
