"""Command line entry point: ``liftwing run|sweep|compare``."""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from liftwing.config import ConfigurationError
from liftwing.harness.metrics import compare_runs, compute_metrics
from liftwing.harness.scenario import load_scenario, load_scenarios, run_scenario
from liftwing.harness.telemetry import read_metrics, write_csv, write_metrics


def _run_one(scenario, out: Path, seed, decimate: int):
    result = run_scenario(scenario, seed=seed)
    metrics = compute_metrics(result)
    write_csv(result, out / f"{scenario.name}.csv", decimate=decimate)
    write_metrics(metrics, out / f"{scenario.name}.json")
    return metrics


def _summary(m) -> str:
    tt = "-" if m.transition_time is None else f"{m.transition_time:.3f} s"
    s = (f"{m.name}: E={m.energy:.1f} J  Pmean={m.mean_power:.1f} W  pos_rms={m.position_rms:.3f} m  "
         f"beta_rms={m.sideslip_rms:.4f} rad  dz_max={m.max_altitude_error:.3f} m  t_trans={tt}")
    if m.aborted:
        s += f"  ABORTED ({m.aborted})"
    return s


def cmd_run(args) -> int:
    sc = load_scenario(args.scenario)
    m = _run_one(sc, Path(args.out), args.seed, args.decimate)
    print(_summary(m))
    return 1 if m.aborted else 0


def cmd_sweep(args) -> int:
    scenarios = load_scenarios(args.directory)
    names = [s.name for s in scenarios]
    if len(set(names)) != len(names):
        raise ConfigurationError("scenario names must be unique within a sweep")
    out = Path(args.out)
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = {s.name: pool.submit(_run_one, s, out, args.seed, args.decimate) for s in scenarios}
            results = {name: f.result() for name, f in futures.items()}
    else:
        results = {s.name: _run_one(s, out, args.seed, args.decimate) for s in scenarios}
    merged = {name: results[name].to_dict() for name in sorted(results)}
    (out / "summary.json").write_text(json.dumps(merged, indent=2, sort_keys=True) + "\n")
    for name in sorted(results):
        print(_summary(results[name]))
    return 1 if any(m.aborted for m in results.values()) else 0


def _load_metrics(path: str, out: Path, seed):
    p = Path(path)
    if p.suffix in (".yaml", ".yml"):
        return _run_one(load_scenario(p), out, seed, 1)
    return read_metrics(p)


def cmd_compare(args) -> int:
    out = Path(args.out)
    a = _load_metrics(args.run_a, out, args.seed)
    b = _load_metrics(args.run_b, out, args.seed)
    report = compare_runs(a, b)
    for line in report.lines():
        print(line)
    if args.report:
        Path(args.report).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="liftwing", description="Lifting-wing quadcopter scenario harness")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="runs", help="output directory for CSV logs and JSON metrics")
    common.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    common.add_argument("--decimate", type=int, default=1, help="write every n-th controller sample")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="run one scenario file")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", parents=[common], help="run every scenario file in a directory")
    p.add_argument("directory")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", parents=[common],
                       help="compare two runs (metric JSON files or scenario files)")
    p.add_argument("run_a")
    p.add_argument("run_b")
    p.add_argument("--report", default=None, help="write the comparison report as JSON")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
