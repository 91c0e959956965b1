"""Aggregate simulation logs into reports and side-by-side comparisons.

Displacement errors are always recomputed from the logged predictions and the
scenario's ground truth; nothing the engine computed about accuracy is trusted.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .core import LIGHT_HORIZON_US, FusionMode, Micros, PredictedTrajectory, Vec2
from .engine import FusionEvent, SimulationLog
from .errors import InconsistentLog, ScenarioMismatch
from .scenario import Scenario, true_state

REPORT_SCHEMA_VERSION = 1
DEFAULT_LOOKAHEAD_US: Micros = LIGHT_HORIZON_US
MODES = tuple(m.value for m in FusionMode)


def _extended_position(traj: PredictedTrajectory, t: Micros) -> Vec2:
    """Position on ``traj`` at ``t``; past the last point the final velocity is held."""
    if traj.covers(t):
        return traj.position_at(t)
    if not traj.points or t < traj.points[0][0]:
        raise ValueError(f"trajectory of {traj.object_id} starts after {t} us")
    if len(traj.points) == 1:
        return traj.points[-1][1]
    (t0, p0), (t1, p1) = traj.points[-2], traj.points[-1]
    a = (t - t1) / (t1 - t0)
    return Vec2(p1.x + a * (p1.x - p0.x), p1.y + a * (p1.y - p0.y))


def tick_displacement_error(predicted: Iterable[PredictedTrajectory], scenario: Scenario,
                            eval_time: Micros) -> float | None:
    """Mean error over one planning set, or None for an empty set."""
    errs = [
        _extended_position(p, eval_time).dist(true_state(scenario, p.object_id, eval_time)[0])
        for p in predicted
    ]
    return float(np.mean(errs)) if errs else None


def displacement_series(log: SimulationLog, scenario: Scenario,
                        lookahead: Micros = DEFAULT_LOOKAHEAD_US) -> list[float | None]:
    return [tick_displacement_error(d.predicted_set, scenario, d.sensed_at + lookahead) for d in log.decisions]


def _mean(values: Iterable[float | None]) -> float | None:
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else None


@dataclass(frozen=True)
class MetricsReport:
    scenario_name: str
    scenario_fingerprint: str
    policy: str
    seed: int
    n_ticks: int
    deadline_miss_ratio: float | None  # None without an SoR stream
    e2e_latency: dict[str, float]
    output_interval: dict[str, float]
    displacement_error_series: list[float | None]
    mean_displacement_error: float | None
    de_by_mode: dict[str, float | None]
    mode_occupancy: dict[str, float]
    boundary_violations: int
    # Mean DE per lookahead in frames, filled only when a sweep is requested.
    de_by_lookahead: dict[int, float | None] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["de_by_lookahead"] = {str(k): v for k, v in self.de_by_lookahead.items()}
        return {"schema_version": REPORT_SCHEMA_VERSION, **d}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> MetricsReport:
        d = dict(d)
        version = d.pop("schema_version", None)
        if version != REPORT_SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema version {version!r}")
        d["de_by_lookahead"] = {int(k): v for k, v in d.get("de_by_lookahead", {}).items()}
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _check(log: SimulationLog, scenario: Scenario) -> None:
    if log.scenario_fingerprint != scenario.fingerprint():
        raise InconsistentLog("log was produced by a different scenario")
    n = scenario.n_ticks
    if len(log.decisions) != n:
        raise InconsistentLog(f"{len(log.decisions)} decisions for {n} ticks")
    if len(log.fusion_events) != n:
        raise InconsistentLog(f"{len(log.fusion_events)} fusion events for {n} ticks")
    for k, (d, e) in enumerate(zip(log.decisions, log.fusion_events)):
        if d.tick != k or e.tick != k:
            raise InconsistentLog(f"entry {k} has tick {d.tick}/{e.tick}")
        if d.fusion_mode_used is not e.mode:
            raise InconsistentLog(f"tick {k}: decision mode {d.fusion_mode_used} but event mode {e.mode}")
        if d.decided_at - d.sensed_at != d.e2e_latency:
            raise InconsistentLog(f"tick {k}: e2e latency does not match its timestamps")


def summarize(log: SimulationLog, scenario: Scenario, lookahead: Micros = DEFAULT_LOOKAHEAD_US,
              lookahead_frames: Sequence[int] = ()) -> MetricsReport:
    _check(log, scenario)
    n = len(log.decisions)

    if log.sor_present:
        missed = sum(1 for e in log.fusion_events if e.on_time is False)
        miss_ratio = missed / n if n else 0.0
    else:
        miss_ratio = None

    e2e = np.array([d.e2e_latency for d in log.decisions], dtype=float)
    e2e_stats = {
        "mean": float(e2e.mean()), "p50": float(np.percentile(e2e, 50)),
        "p95": float(np.percentile(e2e, 95)), "max": float(e2e.max()),
    } if n else {}
    gaps = np.diff(np.array([d.decided_at for d in log.decisions], dtype=float))
    gap_stats = {
        "mean": float(gaps.mean()), "p95": float(np.percentile(gaps, 95)),
        "max": float(gaps.max()), "jitter": float(gaps.std()),
    } if len(gaps) else {}

    series = displacement_series(log, scenario, lookahead)
    modes = [e.mode.value for e in log.fusion_events]
    de_by_mode = {m: _mean(v for v, k in zip(series, modes) if k == m) for m in MODES}
    occupancy = {m: (modes.count(m) / n if n else 0.0) for m in MODES}

    curve = {
        k: _mean(displacement_series(log, scenario, k * log.frame_period)) for k in lookahead_frames
    }
    return MetricsReport(
        scenario_name=log.scenario_name,
        scenario_fingerprint=log.scenario_fingerprint,
        policy=log.policy,
        seed=log.seed,
        n_ticks=n,
        deadline_miss_ratio=miss_ratio,
        e2e_latency=e2e_stats,
        output_interval=gap_stats,
        displacement_error_series=series,
        mean_displacement_error=_mean(series),
        de_by_mode=de_by_mode,
        mode_occupancy=occupancy,
        boundary_violations=len(log.boundary_violations),
        de_by_lookahead=curve,
    )


def _flat(report: MetricsReport) -> dict[str, float | None]:
    row: dict[str, float | None] = {"deadline_miss_ratio": report.deadline_miss_ratio}
    row.update({f"e2e_{k}": v for k, v in report.e2e_latency.items()})
    row.update({f"interval_{k}": v for k, v in report.output_interval.items()})
    row["mean_displacement_error"] = report.mean_displacement_error
    row.update({f"de_{m}": report.de_by_mode.get(m) for m in MODES})
    row.update({f"occupancy_{m}": report.mode_occupancy.get(m) for m in MODES})
    row.update({f"de_lookahead_{k}": v for k, v in sorted(report.de_by_lookahead.items())})
    row["boundary_violations"] = float(report.boundary_violations)
    return row


@dataclass(frozen=True)
class Comparison:
    names: tuple[str, ...]
    # metric -> one value per name
    rows: dict[str, tuple[float | None, ...]]

    def value(self, metric: str, name: str) -> float | None:
        return self.rows[metric][self.names.index(name)]

    def deltas(self, metric: str) -> tuple[float | None, ...]:
        """Each report's value minus the first report's value."""
        vals = self.rows[metric]
        base = vals[0]
        return tuple(None if v is None or base is None else v - base for v in vals)

    def to_csv(self) -> str:
        buf: list[list[Any]] = [["metric", *self.names, *(f"delta_{n}" for n in self.names[1:])]]
        for metric, vals in self.rows.items():
            buf.append([metric, *(_fmt(v) for v in vals), *(_fmt(d) for d in self.deltas(metric)[1:])])
        return _csv(buf)


def compare(reports: Mapping[str, MetricsReport] | Sequence[tuple[str, MetricsReport]]) -> Comparison:
    """Side-by-side table, rows in a fixed metric order and columns in the given name order."""
    items = list(reports.items()) if isinstance(reports, Mapping) else list(reports)
    if len(items) < 2:
        raise ValueError("compare needs at least two reports")
    names = [n for n, _ in items]
    if len(set(names)) != len(names):
        raise ValueError("report names must be unique")
    prints = {r.scenario_fingerprint for _, r in items}
    if len(prints) != 1:
        raise ScenarioMismatch(f"reports cover {len(prints)} different scenarios")
    flats = [_flat(r) for _, r in items]
    metrics: list[str] = []
    for f in flats:
        metrics.extend(k for k in f if k not in metrics)
    rows = {m: tuple(f.get(m) for f in flats) for m in metrics}
    return Comparison(tuple(names), rows)


def _fmt(v: float | None) -> str:
    return "" if v is None else repr(float(v))


def _csv(rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def de_series_csv(report: MetricsReport, modes: Sequence[str]) -> str:
    rows: list[list[Any]] = [["tick", "de_m", "mode"]]
    rows += [[k, _fmt(v), m] for k, (v, m) in enumerate(zip(report.displacement_error_series, modes))]
    return _csv(rows)


def fusion_events_csv(events: Sequence[FusionEvent]) -> str:
    rows: list[list[Any]] = [["tick", "mode", "staleness_us", "wait_us", "on_time"]]
    for e in events:
        on_time = "" if e.on_time is None else int(e.on_time)
        rows.append([e.tick, e.mode.value, "" if e.staleness is None else e.staleness, e.wait, on_time])
    return _csv(rows)
