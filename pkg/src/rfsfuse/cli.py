"""Command-line front end.

Subcommands: `run` (Monte-Carlo experiment -> CSV/JSON plus figures),
`weights` (weight-map CSV export plus heat maps), `validate` (scenario
checks). Exit codes: 0 success, 1 runtime failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import BUNDLED_CONFIGS, RunConfig, load_bundled, load_config, validate_raw
from .models import fov_indicator
from .sim import run_monte_carlo
from .weights import build_weight_map, write_weight_map_csv

__all__ = ["main"]


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _resolve_config(spec: str) -> RunConfig:
    if spec in BUNDLED_CONFIGS:
        return load_bundled(spec)
    path = Path(spec)
    if not path.exists():
        raise FileNotFoundError(f"config not found: {spec}")
    return load_config(path)


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    scenario, settings, runs = cfg.scenario, cfg.settings, cfg.runs
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    if getattr(args, "runs", None) is not None:
        runs = args.runs
    if getattr(args, "pipelines", None):
        settings = replace(settings,
                           pipelines=tuple(args.pipelines.split(",")))
    return RunConfig(cfg.name, scenario, settings, runs)


def _write_ospa_csv(result, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scan", "pipeline", "mean", "std"])
        for p in result.pipelines:
            arr = result.ospa[p]
            mean = arr.mean(axis=0)
            std = arr.std(axis=0, ddof=1) if arr.shape[0] > 1 \
                else np.zeros(arr.shape[1])
            for k in range(result.n_scans):
                writer.writerow([str(k + 1), p, _fmt(mean[k]), _fmt(std[k])])


def _write_cardinality_csv(result, path: Path) -> None:
    true_mean = result.true_cardinality.mean(axis=0)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scan", "pipeline", "mean_true", "mean_est"])
        for p in result.pipelines:
            est = result.cardinality[p].mean(axis=0)
            for k in range(result.n_scans):
                writer.writerow([str(k + 1), p, _fmt(true_mean[k]), _fmt(est[k])])


def _write_summary(cfg: RunConfig, result, wall_seconds: float,
                   path: Path) -> None:
    summary = {
        "config": cfg.name,
        "runs": result.n_runs,
        "seed": cfg.scenario.seed,
        "steady_state_scans": [result.steady_state_start, result.n_scans],
        "true_steady_state_cardinality": result.steady_true_cardinality(),
        "wall_seconds": wall_seconds,
        "local_filter_seconds": result.runtimes.get("local_filters", 0.0),
        "pipelines": {
            p: {
                "steady_state_mean_ospa": result.steady_mean_ospa(p),
                "steady_state_mean_cardinality": result.steady_mean_cardinality(p),
                "runtime_seconds": result.runtimes.get(p, 0.0),
            }
            for p in result.pipelines
        },
    }
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")


def cmd_run(args) -> int:
    cfg = _apply_overrides(_resolve_config(args.config), args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    weight_map = build_weight_map(cfg.scenario.sensors,
                                  cfg.settings.partition, cfg.settings.euf)
    clustering_log = [] if args.clustering_dump else None
    t0 = time.perf_counter()
    result = run_monte_carlo(cfg.scenario, cfg.settings, cfg.runs,
                             weight_map=weight_map,
                             clustering_log=clustering_log)
    wall = time.perf_counter() - t0
    _write_ospa_csv(result, out / "ospa.csv")
    _write_cardinality_csv(result, out / "cardinality.csv")
    _write_summary(cfg, result, wall, out / "summary.json")
    if args.export_weights:
        write_weight_map_csv(weight_map, out / "weight_map.csv")
    if clustering_log is not None:
        with open(out / "clustering.jsonl", "w") as fh:
            for record in clustering_log:
                fh.write(json.dumps(record) + "\n")
    if args.figures:
        from .report import save_result_figures, save_weight_map_figures
        save_result_figures(result, out)
        if args.export_weights:
            save_weight_map_figures(weight_map, out, cfg.scenario.sensors)
    print(f"{cfg.name}: {result.n_runs} runs, {result.n_scans} scans "
          f"-> {out} ({wall:.1f}s)")
    for p in result.pipelines:
        print(f"  {p:10s} steady-state OSPA "
              f"{result.steady_mean_ospa(p):7.2f} m, "
              f"cardinality {result.steady_mean_cardinality(p):6.2f}")
    return 0


def cmd_weights(args) -> int:
    cfg = _apply_overrides(_resolve_config(args.config), args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    weight_map = build_weight_map(cfg.scenario.sensors,
                                  cfg.settings.partition, cfg.settings.euf)
    write_weight_map_csv(weight_map, out / "weight_map.csv")
    if args.figures:
        from .report import save_weight_map_figures
        save_weight_map_figures(weight_map, out, cfg.scenario.sensors)
    flagged = int(weight_map.flagged.sum())
    print(f"{cfg.name}: wrote weight map for {weight_map.n_sensors} sensors, "
          f"{weight_map.partition.n_cells} cells ({flagged} flagged) -> {out}")
    return 0


def cmd_validate(args) -> int:
    spec = args.config
    try:
        if spec in BUNDLED_CONFIGS:
            from .config import bundled_path
            raw = json.loads(bundled_path(spec).read_text())
        else:
            with open(spec) as fh:
                raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 2
    problems = validate_raw(raw)
    if problems:
        for p in problems:
            print(f"violation: {p}", file=sys.stderr)
        return 2
    cfg = _resolve_config(spec)
    scenario = cfg.scenario
    print(f"{cfg.name}: valid ({len(scenario.sensors)} sensors, "
          f"{len(scenario.tracks)} tracks, {scenario.duration_scans} scans)")
    from .sim import generate_truth
    truth = generate_truth(scenario)
    for i, sensor in enumerate(scenario.sensors):
        seen = sum(int(any(fov_indicator(x, sensor) for x in states))
                   for states in truth if len(states))
        frac = seen / scenario.duration_scans
        print(f"  sensor {i}: fov {sensor.fov_max:.0f} m, "
              f"sees >=1 object in {100 * frac:.0f}% of scans")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rfs-fuse",
        description="Multi-sensor multi-object fusion experiments "
                    "(local GM-PHD/GM-MB filters, space-varying-weight fusion)")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a Monte-Carlo experiment")
    run.add_argument("--config", required=True,
                     help=f"config path or one of {', '.join(BUNDLED_CONFIGS)}")
    run.add_argument("--runs", type=int, default=None,
                     help="override the config's run count")
    run.add_argument("--seed", type=int, default=None,
                     help="override the config's seed")
    run.add_argument("--out", default="results", help="output directory")
    run.add_argument("--pipelines", default=None,
                     help="comma-separated pipeline subset override")
    run.add_argument("--figures", action=argparse.BooleanOptionalAction,
                     default=True, help="render PNG figures")
    run.add_argument("--export-weights", action="store_true",
                     help="also write weight_map.csv (and maps if --figures)")
    run.add_argument("--clustering-dump", action="store_true",
                     help="write per-scan clustering of run 0 as JSON lines")
    run.set_defaults(func=cmd_run)

    weights = sub.add_parser("weights", help="export the fusion weight map")
    weights.add_argument("--config", required=True)
    weights.add_argument("--out", default="results")
    weights.add_argument("--seed", type=int, default=None)
    weights.add_argument("--figures", action=argparse.BooleanOptionalAction,
                         default=True)
    weights.set_defaults(func=cmd_weights)

    validate = sub.add_parser("validate", help="check a scenario config")
    validate.add_argument("--config", required=True)
    validate.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
