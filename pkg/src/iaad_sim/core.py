"""Shared domain types: integer-microsecond time, planar geometry, frames, tracks."""

from __future__ import annotations

import enum
import math
from bisect import bisect_left
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .errors import HorizonExceeded, StaleFrame

# All simulation time is integer microseconds since the start of the run.
Micros = int

US_PER_S = 1_000_000
US_PER_MS = 1_000

DEFAULT_FRAME_PERIOD_US: Micros = 100_000  # 10 Hz
TRACK_CAPACITY = 25
LIGHT_HORIZON_US: Micros = 500_000
HEAVY_HORIZON_US: Micros = 5_000_000


def timestamp_of_tick(tick: int, frame_period: Micros = DEFAULT_FRAME_PERIOD_US) -> Micros:
    if tick < 0 or frame_period <= 0:
        raise ValueError("tick must be >= 0 and frame_period > 0")
    return tick * frame_period


def seconds(us: Micros) -> float:
    return us / US_PER_S


def micros(s: float) -> Micros:
    """Round a duration in seconds to whole microseconds."""
    return int(round(s * US_PER_S))


@dataclass(frozen=True, slots=True)
class Vec2:
    """A position (m) or velocity (m/s) in the fixed world frame."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite vector ({self.x}, {self.y})")

    def __add__(self, other: Vec2) -> Vec2:
        return Vec2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: Vec2) -> Vec2:
        return Vec2(self.x - other.x, self.y - other.y)

    def scale(self, k: float) -> Vec2:
        return Vec2(self.x * k, self.y * k)

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def dist(self, other: Vec2) -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def as_list(self) -> list[float]:
        return [self.x, self.y]


Position2D = Vec2
Velocity2D = Vec2


class Source(str, enum.Enum):
    SOV = "SoV"
    SOR = "SoR"


class FusionMode(str, enum.Enum):
    INTRA = "INTRA"
    INTER = "INTER"
    PLANNING = "PLANNING"
    NO_FUSION = "NONE"


@dataclass(frozen=True, slots=True)
class Detection:
    object_id: str | None
    position: Vec2
    velocity: Vec2
    source: Source


@dataclass(frozen=True)
class PerceptionFrame:
    tick: int
    timestamp: Micros
    source: Source
    detections: tuple[Detection, ...] = ()
    fused: bool = False  # fused frames carry SoR detections inside a SoV frame

    def __post_init__(self):
        if self.fused:
            return
        for d in self.detections:
            if d.source is not self.source:
                raise ValueError(f"{d.source} detection in a {self.source} frame")

    def object_ids(self) -> set[str | None]:
        return {d.object_id for d in self.detections}


@dataclass(frozen=True, slots=True)
class TrackState:
    t: Micros
    position: Vec2
    velocity: Vec2


class Track:
    """Bounded FIFO of observed states for one object, strictly increasing in time."""

    def __init__(self, object_id: str | None, capacity: int = TRACK_CAPACITY):
        self.object_id = object_id
        self.states: deque[TrackState] = deque(maxlen=capacity)

    def append(self, state: TrackState) -> None:
        if self.states and state.t <= self.states[-1].t:
            raise StaleFrame(
                f"track {self.object_id}: state at {state.t} us is not after {self.states[-1].t} us"
            )
        self.states.append(state)

    @property
    def last_time(self) -> Micros:
        return self.states[-1].t

    def recent(self, n: int) -> list[TrackState]:
        n = min(n, len(self.states))
        return list(self.states)[len(self.states) - n:]

    def __len__(self) -> int:
        return len(self.states)

    def __iter__(self) -> Iterator[TrackState]:
        return iter(self.states)

    @classmethod
    def from_states(cls, object_id: str | None, states: Iterable[TrackState],
                    capacity: int = TRACK_CAPACITY) -> Track:
        track = cls(object_id, capacity)
        for s in states:
            track.append(s)
        return track


@dataclass(frozen=True)
class PredictedTrajectory:
    """Future path issued at ``issued_at``; points lie in (issued_at, issued_at + horizon]."""

    object_id: str | None
    issued_at: Micros
    horizon: Micros
    points: tuple[tuple[Micros, Vec2], ...]

    def __post_init__(self):
        last = self.issued_at
        for t, _ in self.points:
            if t <= last:
                raise ValueError("trajectory point times must be strictly increasing after issued_at")
            last = t
        if self.points and self.points[-1][0] > self.issued_at + self.horizon:
            raise ValueError("trajectory point beyond its horizon")

    @property
    def end(self) -> Micros:
        return self.points[-1][0]

    def covers(self, t: Micros) -> bool:
        return bool(self.points) and self.points[0][0] <= t <= self.end

    def position_at(self, t: Micros) -> Vec2:
        """Linear interpolation between trajectory points."""
        if not self.covers(t):
            raise HorizonExceeded(
                f"trajectory of {self.object_id} issued at {self.issued_at} us does not cover {t} us"
            )
        times = [p[0] for p in self.points]
        i = bisect_left(times, t)
        if times[i] == t:
            return self.points[i][1]
        (t0, p0), (t1, p1) = self.points[i - 1], self.points[i]
        a = (t - t0) / (t1 - t0)
        return Vec2(p0.x + a * (p1.x - p0.x), p0.y + a * (p1.y - p0.y))


@dataclass(frozen=True)
class PlanningDecision:
    tick: int
    sensed_at: Micros
    decided_at: Micros
    e2e_latency: Micros
    fusion_mode_used: FusionMode
    predicted_set: tuple[PredictedTrajectory, ...] = field(default=())

    def __post_init__(self):
        if self.decided_at != self.sensed_at + self.e2e_latency:
            raise ValueError("decided_at must equal sensed_at + e2e_latency")
