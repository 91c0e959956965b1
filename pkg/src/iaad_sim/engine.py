"""Discrete-event core: per-tick SoV and SoR pipelines, the wait window, and the
E2E / output-interval boundaries.

One run is a single-threaded loop. SoR messages are produced first (the roadside
pipeline does not depend on the vehicle), then SoV ticks consume arrivals in
(time, stream, tick) order up to each tick's fusion gate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .core import (
    FusionMode,
    Micros,
    PerceptionFrame,
    PlanningDecision,
    PredictedTrajectory,
    Source,
)
from .errors import ConfigError, InsufficientHistory
from .fusion import (
    PolicyConfig,
    PolicyMode,
    SorBuffer,
    inter_frame_fuse,
    intra_frame_fuse,
    planning_fuse,
    select_mode,
)
from .network import HEAVY, POST_PERCEPTION, Channel, LatencyTrace, LinkModel, SyntheticLink, TraceLink
from .prediction import HEAVY_MIN_STATES, Tracker, heavy_predict, light_predict
from .scenario import Scenario, sense

E2E_VIOLATION = "E2E"
INTERVAL_VIOLATION = "INTERVAL"


@dataclass(frozen=True)
class StageLatencies:
    """Per-stage compute latency in microseconds."""

    sov_perception: Micros = 30_000
    sov_tracking: Micros = 5_000
    sov_light_prediction: Micros = 5_000
    sov_planning: Micros = 10_000
    sor_perception: Micros = 30_000
    sor_tracking: Micros = 4_000
    sor_heavy_prediction: Micros = 6_000
    sor_clock_offset: Micros = 0  # SoR clock minus SoV clock

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            if name != "sor_clock_offset" and getattr(self, name) < 0:
                raise ConfigError(f"stages.{name} must be >= 0")

    @property
    def sov_after_gate(self) -> Micros:
        return self.sov_tracking + self.sov_light_prediction + self.sov_planning

    @property
    def sor_total(self) -> Micros:
        return self.sor_perception + self.sor_tracking + self.sor_heavy_prediction


@dataclass(frozen=True)
class BoundaryConfig:
    e2e_bound: Micros = 100_000
    output_interval_bound: Micros = 150_000
    wait_window: Micros = 35_000

    def validate(self, stages: StageLatencies, frame_period: Micros) -> None:
        if self.e2e_bound <= 0 or self.output_interval_bound <= 0 or self.wait_window < 0:
            raise ConfigError("bounds must be > 0 and wait_window >= 0")
        if self.wait_window > self.e2e_bound - stages.sov_after_gate:
            raise ConfigError("wait_window exceeds e2e_bound minus the post-gate SoV stages")
        if stages.sov_perception + stages.sov_after_gate > self.e2e_bound:
            raise ConfigError("SoV stages alone exceed e2e_bound")
        if frame_period > self.output_interval_bound:
            raise ConfigError("frame period exceeds the output interval bound")


@dataclass(frozen=True)
class FusionEvent:
    tick: int
    mode: FusionMode
    staleness: Micros | None
    wait: Micros
    on_time: bool | None  # matching SoR frame made the window; None when intra was not attempted


@dataclass(frozen=True)
class Violation:
    tick: int
    kind: str
    value: Micros
    bound: Micros


@dataclass
class SimulationLog:
    scenario_name: str
    scenario_fingerprint: str
    seed: int
    policy: str
    frame_period: Micros
    sor_present: bool
    frames: list[PerceptionFrame] = field(default_factory=list)
    deliveries: dict[str, LatencyTrace] = field(default_factory=dict)
    decisions: list[PlanningDecision] = field(default_factory=list)
    fusion_events: list[FusionEvent] = field(default_factory=list)
    boundary_violations: list[Violation] = field(default_factory=list)

    @property
    def n_ticks(self) -> int:
        return len(self.decisions)


def check_boundaries(decisions: SimulationLog | Iterable[PlanningDecision],
                     boundaries: BoundaryConfig) -> list[Violation]:
    """Recompute E2E and output-interval violations from decision timestamps alone."""
    if isinstance(decisions, SimulationLog):
        decisions = decisions.decisions
    out = []
    prev = None
    for d in decisions:
        e2e = d.decided_at - d.sensed_at
        if e2e > boundaries.e2e_bound:
            out.append(Violation(d.tick, E2E_VIOLATION, e2e, boundaries.e2e_bound))
        if prev is not None:
            gap = d.decided_at - prev.decided_at
            if gap > boundaries.output_interval_bound:
                out.append(Violation(d.tick, INTERVAL_VIOLATION, gap, boundaries.output_interval_bound))
        prev = d
    return out


@dataclass
class SorProduct:
    """Everything the roadside side produces in one run; independent of the SoV policy."""

    frames: list[PerceptionFrame]
    post_arrival: list[Micros | None]
    # (arrival, stream order, tick, payload); payload is a frame or (issued_at, trajectories)
    arrivals: list[tuple]
    traces: dict[str, LatencyTrace]


def _as_link(link: LinkModel | SyntheticLink | TraceLink, scenario: Scenario, seed: int) -> SyntheticLink | TraceLink:
    if isinstance(link, LinkModel):
        return SyntheticLink(link.with_episodes(scenario.episodes), seed)
    return link


def prepare_sor(scenario: Scenario, link: LinkModel | SyntheticLink | TraceLink,
                stages: StageLatencies = StageLatencies(), policy: PolicyConfig = PolicyConfig(),
                seed: int = 0) -> SorProduct:
    """Run the roadside pipeline and both transmissions for every tick.

    The result can be shared by several :class:`Simulation` instances that differ
    only in the vehicle-side policy.
    """
    link = _as_link(link, scenario, seed)
    dt = scenario.frame_period
    tracker = Tracker(timeout=policy.sor_track_timeout)
    post = Channel(link, POST_PERCEPTION)
    heavy = Channel(link, HEAVY)
    frames, post_arrival, arrivals = [], [], []
    for k in range(scenario.n_ticks):
        ts = k * dt
        frame = sense(scenario, Source.SOR, k, seed)
        tracker.update(frame)
        frames.append(frame)
        a = post.transmit(k, ts + stages.sor_clock_offset + stages.sor_perception)
        post_arrival.append(a)
        if a is not None:
            arrivals.append((a, 0, k, frame))
        issued = ts + stages.sor_clock_offset + stages.sor_total
        trajs = tuple(
            heavy_predict(tracker.tracks[d.object_id], issued, dt)
            for d in frame.detections
            if d.object_id in tracker.tracks and len(tracker.tracks[d.object_id]) >= HEAVY_MIN_STATES
        )
        a = heavy.transmit(k, issued)
        if a is not None:
            arrivals.append((a, 1, k, (issued, trajs)))
    arrivals.sort(key=lambda e: e[:3])
    return SorProduct(frames, post_arrival, arrivals, {POST_PERCEPTION: post.trace, HEAVY: heavy.trace})


class Simulation:
    """State of one run; :meth:`sov_tick` advances the vehicle pipeline by one frame."""

    def __init__(self, scenario: Scenario, link: LinkModel | SyntheticLink | TraceLink,
                 stages: StageLatencies = StageLatencies(), boundaries: BoundaryConfig = BoundaryConfig(),
                 policy: PolicyConfig = PolicyConfig(), seed: int = 0, sor: SorProduct | None = None):
        boundaries.validate(stages, scenario.frame_period)
        self.scenario = scenario
        self.stages = stages
        self.boundaries = boundaries
        self.policy = policy
        self.seed = seed
        self.sor_present = scenario.sor_coverage is not None
        self.buffer = SorBuffer()
        self.tracker = Tracker(timeout=policy.sov_track_timeout)
        if self.sor_present and sor is None:
            sor = prepare_sor(scenario, link, stages, policy, seed)
        self.sor = sor if self.sor_present else None
        self._next_arrival = 0
        self._prev_decided: Micros | None = None
        self._recovering = False
        self._streak = 0
        self.log = SimulationLog(
            scenario.name, scenario.fingerprint(), seed, policy.mode.value, scenario.frame_period,
            self.sor_present,
        )
        if self.sor is not None:
            self.log.deliveries = self.sor.traces

    def _deliver_until(self, t: Micros) -> None:
        arrivals = self.sor.arrivals
        while self._next_arrival < len(arrivals) and arrivals[self._next_arrival][0] <= t:
            at, stream, tick, payload = arrivals[self._next_arrival]
            if stream == 0:
                self.buffer.offer_post(payload, at)
            else:
                issued, trajs = payload
                self.buffer.offer_heavy(tick, issued, trajs, at)
            self._next_arrival += 1

    def sov_tick(self, tick: int) -> PlanningDecision:
        sc, st, bc, pc = self.scenario, self.stages, self.boundaries, self.policy
        ts = tick * sc.frame_period
        sov = sense(sc, Source.SOV, tick, self.seed)
        perception_done = ts + st.sov_perception
        rest = st.sov_after_gate

        # Longest wait that keeps both boundaries; waiting never pushes past them.
        cap = min(bc.wait_window, bc.e2e_bound - st.sov_perception - rest)
        if self._prev_decided is not None:
            cap = min(cap, self._prev_decided + bc.output_interval_bound - perception_done - rest)
        cap = max(cap, 0)

        on_time: bool | None = None
        wait = 0
        if self.sor_present and pc.mode is not PolicyMode.PLANNING_ONLY:
            a = self.sor.post_arrival[tick]
            on_time = a is not None and a <= perception_done + cap
            wait = max(0, a - perception_done) if on_time else cap
        if self.sor_present:
            self._deliver_until(perception_done + wait)

        if on_time:
            self._streak += 1
        else:
            self._streak = 0
        fresh = bool(on_time) and (not self._recovering or self._streak > pc.switch_back_hysteresis)

        mode = select_mode(fresh, self.buffer, ts, pc) if self.sor_present else FusionMode.NO_FUSION
        staleness: Micros | None = None
        if mode is FusionMode.INTRA:
            fused = intra_frame_fuse(sov, self.sor.frames[tick], pc.dedup_gate)
            self.buffer.mark_consumed(tick)
            staleness = 0
        elif mode is FusionMode.INTER:
            fused, staleness = inter_frame_fuse(sov, self.buffer, ts, pc)
        else:
            fused = sov
        self._recovering = mode is not FusionMode.INTRA
        self.tracker.update(fused)

        local = []
        for oid in sorted(self.tracker.tracks):
            try:
                local.append(light_predict(self.tracker.tracks[oid], ts, sc.frame_period))
            except InsufficientHistory:
                pass
        predicted: list[PredictedTrajectory] = local
        if mode is FusionMode.PLANNING:
            predicted = planning_fuse(local, self.buffer, ts, pc)
            staleness = ts - self.buffer.heavy_tick * sc.frame_period

        e2e = st.sov_perception + wait + rest
        decision = PlanningDecision(tick, ts, ts + e2e, e2e, mode, tuple(predicted))
        self._prev_decided = decision.decided_at
        self.log.frames.append(sov)
        if self.sor is not None:
            self.log.frames.append(self.sor.frames[tick])
        self.log.decisions.append(decision)
        self.log.fusion_events.append(FusionEvent(tick, mode, staleness, wait, on_time))
        return decision

    def run(self) -> SimulationLog:
        for tick in range(self.scenario.n_ticks):
            self.sov_tick(tick)
        self.log.boundary_violations = check_boundaries(self.log.decisions, self.boundaries)
        return self.log


def run(scenario: Scenario, link: LinkModel | SyntheticLink | TraceLink,
        stages: StageLatencies = StageLatencies(), boundaries: BoundaryConfig = BoundaryConfig(),
        policy: PolicyConfig = PolicyConfig(), seed: int = 0, sor: SorProduct | None = None) -> SimulationLog:
    return Simulation(scenario, link, stages, boundaries, policy, seed, sor).run()
