"""Versioned JSON export and import of simulation logs.

Output is a pure function of the log: keys are sorted and floats use Python's
shortest round-trip repr, so equal logs serialize to identical bytes.
"""

from __future__ import annotations

import json
from typing import Any, Mapping

from .core import Detection, FusionMode, PerceptionFrame, PlanningDecision, PredictedTrajectory, Source, Vec2
from .engine import FusionEvent, SimulationLog, Violation
from .network import LatencyTrace

LOG_SCHEMA_VERSION = 1


def _traj(p: PredictedTrajectory) -> dict[str, Any]:
    return {
        "object_id": p.object_id,
        "issued_at": p.issued_at,
        "horizon": p.horizon,
        "points": [[t, v.x, v.y] for t, v in p.points],
    }


def _frame(f: PerceptionFrame) -> dict[str, Any]:
    return {
        "tick": f.tick,
        "timestamp": f.timestamp,
        "source": f.source.value,
        "detections": [
            {"object_id": d.object_id, "position": d.position.as_list(), "velocity": d.velocity.as_list(),
             "source": d.source.value}
            for d in f.detections
        ],
    }


def log_to_dict(log: SimulationLog) -> dict[str, Any]:
    return {
        "schema_version": LOG_SCHEMA_VERSION,
        "scenario_name": log.scenario_name,
        "scenario_fingerprint": log.scenario_fingerprint,
        "seed": log.seed,
        "policy": log.policy,
        "frame_period": log.frame_period,
        "sor_present": log.sor_present,
        "frames": [_frame(f) for f in log.frames],
        "deliveries": {k: [[t, lat] for t, lat in tr.entries] for k, tr in log.deliveries.items()},
        "decisions": [
            {"tick": d.tick, "sensed_at": d.sensed_at, "decided_at": d.decided_at, "e2e_latency": d.e2e_latency,
             "fusion_mode_used": d.fusion_mode_used.value, "predicted_set": [_traj(p) for p in d.predicted_set]}
            for d in log.decisions
        ],
        "fusion_events": [
            {"tick": e.tick, "mode": e.mode.value, "staleness": e.staleness, "wait": e.wait, "on_time": e.on_time}
            for e in log.fusion_events
        ],
        "boundary_violations": [
            {"tick": v.tick, "kind": v.kind, "value": v.value, "bound": v.bound} for v in log.boundary_violations
        ],
    }


def log_to_json(log: SimulationLog) -> str:
    return json.dumps(log_to_dict(log), sort_keys=True, separators=(",", ":")) + "\n"


def log_from_dict(d: Mapping[str, Any]) -> SimulationLog:
    if d.get("schema_version") != LOG_SCHEMA_VERSION:
        raise ValueError(f"unsupported log schema version {d.get('schema_version')!r}")

    def traj(p: Mapping[str, Any]) -> PredictedTrajectory:
        pts = tuple((int(t), Vec2(x, y)) for t, x, y in p["points"])
        return PredictedTrajectory(p["object_id"], p["issued_at"], p["horizon"], pts)

    def frame(f: Mapping[str, Any]) -> PerceptionFrame:
        dets = tuple(
            Detection(x["object_id"], Vec2(*x["position"]), Vec2(*x["velocity"]), Source(x["source"]))
            for x in f["detections"]
        )
        return PerceptionFrame(f["tick"], f["timestamp"], Source(f["source"]), dets)

    log = SimulationLog(d["scenario_name"], d["scenario_fingerprint"], d["seed"], d["policy"], d["frame_period"],
                        d["sor_present"])
    log.frames = [frame(f) for f in d["frames"]]
    log.deliveries = {k: LatencyTrace([(t, lat) for t, lat in v]) for k, v in d["deliveries"].items()}
    log.decisions = [
        PlanningDecision(x["tick"], x["sensed_at"], x["decided_at"], x["e2e_latency"],
                         FusionMode(x["fusion_mode_used"]), tuple(traj(p) for p in x["predicted_set"]))
        for x in d["decisions"]
    ]
    log.fusion_events = [
        FusionEvent(e["tick"], FusionMode(e["mode"]), e["staleness"], e["wait"], e["on_time"])
        for e in d["fusion_events"]
    ]
    log.boundary_violations = [Violation(v["tick"], v["kind"], v["value"], v["bound"]) for v in d["boundary_violations"]]
    return log


def log_from_json(text: str) -> SimulationLog:
    return log_from_dict(json.loads(text))
