"""Reusable experiment drivers: the approach study (error and detection distance
per input frames), light vs heavy error curves, and policy comparisons over seeds."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .core import FusionMode, Micros, PerceptionFrame, Source
from .engine import BoundaryConfig, SimulationLog, StageLatencies, prepare_sor, run
from .fusion import PolicyConfig, PolicyMode, SorBuffer, intra_frame_fuse, select_mode
from .metrics import MetricsReport, summarize
from .network import LinkModel, SyntheticLink, TraceLink
from .prediction import HEAVY_WINDOW, LIGHT_WINDOW, Tracker, fit_constant_velocity, fit_ctrv
from .scenario import Scenario, approach, ego_state, sense, true_state

TABLE2_FRAMES = (5, 10, 15, 20, 25)
TABLE2_VARIANTS = ("none", "light", "heavy")


def _fused_frames(scenario: Scenario, seed: int) -> Iterable[PerceptionFrame]:
    """Both sides' frames fused per tick, as if every SoR frame arrived in time."""
    has_sor = scenario.sor_coverage is not None
    for k in range(scenario.n_ticks):
        sov = sense(scenario, Source.SOV, k, seed)
        yield intra_frame_fuse(sov, sense(scenario, Source.SOR, k, seed)) if has_sor else sov


def detection_distances(scenario: Scenario, object_id: str, frames: Sequence[int], seed: int = 0) -> dict[int, float]:
    """Ego-object distance at the tick where the object's N-th detected frame is taken."""
    out: dict[int, float] = {}
    seen = 0
    for frame in _fused_frames(scenario, seed):
        if object_id in frame.object_ids():
            seen += 1
            if seen in frames:
                pos, _ = true_state(scenario, object_id, frame.timestamp)
                ego, _ = ego_state(scenario, frame.timestamp)
                out[seen] = pos.dist(ego)
                if len(out) == len(frames):
                    break
    return out


def approach_errors(scenario: Scenario, object_id: str, frames: Sequence[int], seed: int,
                    lookahead: Micros = 500_000, window: int = HEAVY_WINDOW) -> dict[int, float]:
    """Displacement error of a constant-velocity fit over the newest ``min(N, window)``
    states, taken when N frames of the object have been collected."""
    tracker = Tracker()
    out: dict[int, float] = {}
    for frame in _fused_frames(scenario, seed):
        tracker.update(frame)
        track = tracker.tracks.get(object_id)
        if track is None or len(track) not in frames or len(track) in out:
            continue
        model = fit_constant_velocity(track.states, window)
        t = frame.timestamp + lookahead
        out[len(track)] = model.position_at(t).dist(true_state(scenario, object_id, t)[0])
        if len(out) == len(frames):
            break
    return out


@dataclass(frozen=True)
class Table2Row:
    input_frames: int
    mean_displacement_error: float
    distance_no_sor: float
    distance_light_sor: float
    distance_heavy_sor: float


def table2(n_seeds: int = 200, seed: int = 0, frames: Sequence[int] = TABLE2_FRAMES,
           error_variant: str = "none", **scenario_kw) -> list[Table2Row]:
    """Rows of the approach study.

    Distances come from one run per SoR variant (they do not depend on noise);
    the error column is the mean over ``n_seeds`` consecutive seeds.
    """
    dists = {v: detection_distances(approach(v, **scenario_kw), "obj1", frames, seed) for v in TABLE2_VARIANTS}
    sc = approach(error_variant, **scenario_kw)
    errs = np.array([[approach_errors(sc, "obj1", frames, s)[n] for n in frames]
                     for s in range(seed, seed + n_seeds)])
    mean = errs.mean(axis=0)
    return [
        Table2Row(n, float(mean[i]), dists["none"][n], dists["light"][n], dists["heavy"][n])
        for i, n in enumerate(frames)
    ]


def table2_csv(rows: Sequence[Table2Row]) -> str:
    lines = ["input_frames,mean_displacement_error_m,distance_no_sor_m,distance_light_sor_m,distance_heavy_sor_m"]
    for r in rows:
        lines.append(f"{r.input_frames},{r.mean_displacement_error!r},{round(r.distance_no_sor, 6)!r},"
                     f"{round(r.distance_light_sor, 6)!r},{round(r.distance_heavy_sor, 6)!r}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ErrorCurves:
    lookahead_frames: np.ndarray
    light: np.ndarray  # mean error (m) per lookahead
    heavy: np.ndarray
    noise_floor: float  # mean 2-D error of a single noisy detection, sigma * sqrt(pi / 2)


def prediction_error_curves(scenario: Scenario, object_id: str, seeds: Iterable[int],
                            max_frames: int = 50, stride: int = 5) -> ErrorCurves:
    """Light (CV over 5 states) and heavy (CTRV over 20 states) error against lookahead.

    Both predictors are fit on the same fused track at every ``stride``-th tick
    once the track holds a full heavy window. The light model is extrapolated past
    its own 0.5 s horizon so both curves span the same lookaheads.
    """
    ks = np.arange(1, max_frames + 1)
    dt = scenario.frame_period
    light_sum = np.zeros(len(ks))
    heavy_sum = np.zeros(len(ks))
    count = 0
    last_tick = scenario.n_ticks - 1
    for seed in seeds:
        tracker = Tracker()
        for frame in _fused_frames(scenario, seed):
            tracker.update(frame)
            track = tracker.tracks.get(object_id)
            if track is None or len(track) < HEAVY_WINDOW or frame.tick % stride or frame.tick > last_tick:
                continue
            cv = fit_constant_velocity(track.states, LIGHT_WINDOW)
            ctrv = fit_ctrv(track.states, HEAVY_WINDOW)
            for i, k in enumerate(ks):
                t = frame.timestamp + int(k) * dt
                truth, _ = true_state(scenario, object_id, t)
                light_sum[i] += cv.position_at(t).dist(truth)
                heavy_sum[i] += ctrv.position_at(t).dist(truth)
            count += 1
    if count == 0:
        raise ValueError("no evaluation points; is the object tracked long enough?")
    floor = scenario.detection_noise_sigma * math.sqrt(math.pi / 2)
    return ErrorCurves(ks, light_sum / count, heavy_sum / count, floor)


def policy_reports(scenario: Scenario, link: LinkModel | SyntheticLink | TraceLink,
                   policies: Sequence[PolicyMode | str], seeds: Iterable[int],
                   stages: StageLatencies = StageLatencies(), boundaries: BoundaryConfig = BoundaryConfig(),
                   base_policy: PolicyConfig = PolicyConfig()) -> dict[str, list[MetricsReport]]:
    """Run every policy on every seed; the roadside side is computed once per seed."""
    out: dict[str, list[MetricsReport]] = {PolicyMode(p).value: [] for p in policies}
    for seed in seeds:
        sor = prepare_sor(scenario, link, stages, base_policy, seed) if scenario.sor_coverage else None
        for p in policies:
            cfg = replace(base_policy, mode=PolicyMode(p))
            log = run(scenario, link, stages, boundaries, cfg, seed, sor)
            out[cfg.mode.value].append(summarize(log, scenario))
    return out


def mean_de(reports: Sequence[MetricsReport]) -> float:
    vals = [r.mean_displacement_error for r in reports if r.mean_displacement_error is not None]
    return float(np.mean(vals))


def staleness_decision(staleness: Micros, policy: PolicyConfig = PolicyConfig(mode=PolicyMode.INTER_ENABLED),
                       now: Micros = 10_000_000) -> FusionMode:
    """Mode chosen after an intra miss when the newest buffered SoR frame is ``staleness`` old."""
    buf = SorBuffer()
    buf.offer_post(PerceptionFrame(0, now - staleness, Source.SOR), now - staleness)
    return select_mode(False, buf, now, policy)


def log_miss_ratio(log: SimulationLog) -> float:
    return sum(1 for e in log.fusion_events if e.on_time is False) / len(log.fusion_events)
