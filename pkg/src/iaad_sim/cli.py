"""Command-line front end. Every command is a thin wrapper over library calls.

    python -m iaad_sim run -c cfg.json -o out/ [--seed N] [--policy MODE] [--link-trace CSV]
    python -m iaad_sim table2 -c cfg.json -o out/
    python -m iaad_sim compare out1/metrics.json out2/metrics.json
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Sequence

from .config import RunConfig, config_from_dict, parse_config, with_override
from .engine import SimulationLog, run
from .errors import ConfigError, InvalidConfig, ParseError, ScenarioMismatch, TraceExhausted
from .experiments import TABLE2_FRAMES, table2, table2_csv
from .fusion import PolicyMode
from .logio import log_to_json
from .metrics import MODES, MetricsReport, compare, de_series_csv, fusion_events_csv, summarize
from .network import STREAMS

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
TABLE2_MIN_SEEDS = 100


def execute(cfg: RunConfig) -> tuple[SimulationLog, MetricsReport]:
    """One run of a parsed config; the library path behind ``run``."""
    log = run(cfg.scenario, cfg.make_link(), cfg.stages, cfg.boundaries, cfg.policy, cfg.seed)
    report = summarize(log, cfg.scenario, cfg.metrics.lookahead_us, cfg.metrics.lookahead_frames)
    return log, report


def summary_line(report: MetricsReport) -> str:
    miss = "n/a" if report.deadline_miss_ratio is None else f"{report.deadline_miss_ratio:.3f}"
    de = "n/a" if report.mean_displacement_error is None else f"{report.mean_displacement_error:.3f} m"
    occ = " ".join(f"{m}={report.mode_occupancy[m]:.2f}" for m in MODES)
    return f"{report.scenario_name} seed={report.seed} policy={report.policy} miss_ratio={miss} mean_de={de} {occ}"


def write_run(out: Path, log: SimulationLog, report: MetricsReport) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "log.json").write_text(log_to_json(log), encoding="utf-8")
    (out / "metrics.json").write_text(report.to_json(), encoding="utf-8")
    (out / "fusion_events.csv").write_text(fusion_events_csv(log.fusion_events), encoding="utf-8")
    modes = [e.mode.value for e in log.fusion_events]
    (out / "de_series.csv").write_text(de_series_csv(report, modes), encoding="utf-8")
    for stream, trace in log.deliveries.items():
        trace.write(out / f"trace_{stream}.csv")


def _sweep_row(key: Any, report: MetricsReport) -> list[Any]:
    miss = report.deadline_miss_ratio
    de = report.mean_displacement_error
    return [
        key,
        "" if miss is None else repr(miss),
        "" if de is None else repr(de),
        repr(report.e2e_latency.get("max", 0.0)),
        repr(report.output_interval.get("max", 0.0)),
        report.boundary_violations,
        *(repr(report.mode_occupancy[m]) for m in MODES),
    ]


def run_sweep(cfg: RunConfig) -> str:
    """Sweep CSV: one row per seed (sorted) or per parameter value (given order)."""
    sweep = cfg.sweep
    rows: list[list[Any]] = []
    if sweep.seeds is not None:
        key = "seed"
        for s in sorted(cfg.seed + i for i in range(sweep.seeds)):
            _, report = execute(replace(cfg, seed=s))
            rows.append(_sweep_row(s, report))
    else:
        key = sweep.param
        base = {k: v for k, v in cfg.raw.items() if k != "sweep"}
        base["seed"] = cfg.seed
        for value in sweep.values:
            sub = config_from_dict(with_override(base, sweep.param, value), env={})
            _, report = execute(sub)
            rows.append(_sweep_row(json.dumps(value), report))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([key, "miss_ratio", "mean_de_m", "e2e_max_us", "interval_max_us", "violations",
                *(f"occupancy_{m}" for m in MODES)])
    w.writerows(rows)
    return buf.getvalue()


def cmd_run(args: argparse.Namespace) -> int:
    cfg = parse_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.policy is not None:
        cfg = replace(cfg, policy=replace(cfg.policy, mode=PolicyMode(args.policy)))
    if args.link_trace is not None:
        cfg = replace(cfg, link=None, link_trace={s: args.link_trace for s in STREAMS})
    out = Path(args.out)
    log, report = execute(cfg)
    write_run(out, log, report)
    print(summary_line(report))
    if cfg.sweep is not None:
        (out / "sweep.csv").write_text(run_sweep(cfg), encoding="utf-8")
        print(f"sweep written to {out / 'sweep.csv'}")
    return EXIT_OK


def cmd_table2(args: argparse.Namespace) -> int:
    cfg = parse_config(args.config)
    spec = cfg.scenario_spec
    name = spec if isinstance(spec, str) else spec.get("preset")
    if name != "approach":
        raise InvalidConfig("scenario", "table2 needs the 'approach' preset")
    opts = {} if isinstance(spec, str) else {k: v for k, v in spec.items() if k not in ("preset", "sor")}
    n_seeds = max(TABLE2_MIN_SEEDS, cfg.sweep.seeds if cfg.sweep and cfg.sweep.seeds else 0)
    rows = table2(n_seeds, cfg.seed, TABLE2_FRAMES, **opts)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    text = table2_csv(rows)
    (out / "table2.csv").write_text(text, encoding="utf-8")
    print(f"{'frames':>6} {'DE (m)':>8} {'no SoR':>7} {'light':>7} {'heavy':>7}")
    for r in rows:
        print(f"{r.input_frames:>6} {r.mean_displacement_error:>8.3f} {r.distance_no_sor:>7.0f} "
              f"{r.distance_light_sor:>7.0f} {r.distance_heavy_sor:>7.0f}")
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    reports = []
    for p in args.reports:
        path = Path(p)
        report = MetricsReport.from_dict(json.loads(path.read_text(encoding="utf-8")))
        name = path.parent.name if path.stem == "metrics" and path.parent.name else path.stem
        reports.append((name, report))
    names = [n for n, _ in reports]
    if len(set(names)) != len(names):
        reports = [(str(Path(p)), r) for p, (_, r) in zip(args.reports, reports)]
    sys.stdout.write(compare(reports).to_csv())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="iaad_sim", description="IAAD fusion simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one config (or a sweep) and write artifacts")
    p.add_argument("-c", "--config", required=True)
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--policy", choices=[m.value for m in PolicyMode])
    p.add_argument("--link-trace")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("table2", help="approach study: error and detection distance per input frames")
    p.add_argument("-c", "--config", required=True)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_table2)

    p = sub.add_parser("compare", help="side-by-side table of metrics.json reports")
    p.add_argument("reports", nargs="+")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, InvalidConfig, ConfigError, ScenarioMismatch, TraceExhausted) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, json.JSONDecodeError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
