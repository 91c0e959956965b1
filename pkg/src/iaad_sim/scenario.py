"""Ground-truth world: parametric trajectories, sensor coverage, noisy perception frames."""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .core import (
    DEFAULT_FRAME_PERIOD_US,
    Detection,
    Micros,
    PerceptionFrame,
    Source,
    Vec2,
    micros,
    seconds,
)
from .errors import InvalidConfig, TimeOutOfRange, UnknownObject
from .network import Episode, EpisodeKind

CONTIGUITY_TOL = 1e-6
RANGE_EDGE_TOL = 1e-9

# Closure per frame of the "approach" preset; 14 m/s at 10 Hz.
APPROACH_CLOSURE_PER_FRAME = 1.4
SOV_RANGE = 70.0
SOR_LIGHT_RANGE = 170.0
SOR_HEAVY_RANGE = 320.0


@dataclass(frozen=True)
class Line:
    start: Vec2
    speed: float
    heading: float
    duration: float

    def state(self, t: float) -> tuple[Vec2, Vec2]:
        c, s = math.cos(self.heading), math.sin(self.heading)
        d = self.speed * t
        return Vec2(self.start.x + d * c, self.start.y + d * s), Vec2(self.speed * c, self.speed * s)

    @property
    def start_position(self) -> Vec2:
        return self.start


@dataclass(frozen=True)
class Arc:
    center: Vec2
    radius: float
    angular_rate: float
    start_angle: float
    duration: float

    def state(self, t: float) -> tuple[Vec2, Vec2]:
        phi = self.start_angle + self.angular_rate * t
        c, s = math.cos(phi), math.sin(phi)
        r, w = self.radius, self.angular_rate
        return Vec2(self.center.x + r * c, self.center.y + r * s), Vec2(-r * w * s, r * w * c)

    @property
    def start_position(self) -> Vec2:
        return self.state(0.0)[0]


Segment = Line | Arc


@dataclass(frozen=True)
class TrajectorySpec:
    segments: tuple[Segment, ...]

    def __post_init__(self):
        if not self.segments:
            raise InvalidConfig("segments", "trajectory needs at least one segment")
        for k, seg in enumerate(self.segments):
            if seg.duration <= 0:
                raise InvalidConfig(f"segments[{k}].duration", "must be > 0")
        for k in range(len(self.segments) - 1):
            end = self.segments[k].state(self.segments[k].duration)[0]
            nxt = self.segments[k + 1].start_position
            if end.dist(nxt) > CONTIGUITY_TOL:
                raise InvalidConfig(f"segments[{k + 1}]", "not contiguous with previous segment")

    @property
    def duration(self) -> float:
        return sum(s.duration for s in self.segments)

    def state_at(self, t: float) -> tuple[Vec2, Vec2]:
        if t < 0 or t > self.duration + 1e-12:
            raise TimeOutOfRange(f"t={t} s outside trajectory [0, {self.duration}] s")
        for seg in self.segments[:-1]:
            if t < seg.duration:
                return seg.state(t)
            t -= seg.duration
        return self.segments[-1].state(t)


def stationary(at: Vec2, duration: float) -> TrajectorySpec:
    return TrajectorySpec((Line(at, 0.0, 0.0, duration),))


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle in the world frame."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def contains(self, p: Vec2) -> bool:
        return self.xmin <= p.x <= self.xmax and self.ymin <= p.y <= self.ymax


class SensorOwner(str, enum.Enum):
    SOV = "SoV"
    SOR_LIGHT = "SoRLight"
    SOR_HEAVY = "SoRHeavy"

    @property
    def source(self) -> Source:
        return Source.SOV if self is SensorOwner.SOV else Source.SOR


@dataclass(frozen=True)
class SensorCoverage:
    owner: SensorOwner
    range: float
    mount: Vec2 | None = None  # None: rides the ego vehicle
    blind_regions: tuple[Rect, ...] = ()

    def __post_init__(self):
        if self.range <= 0:
            raise InvalidConfig("range", "must be > 0")


@dataclass(frozen=True)
class Scenario:
    name: str
    duration: float
    ego: TrajectorySpec
    objects: Mapping[str, TrajectorySpec]
    coverages: tuple[SensorCoverage, ...]
    frame_period: Micros = DEFAULT_FRAME_PERIOD_US
    detection_noise_sigma: float = 0.5
    # None: velocity noise is the finite difference of consecutive position noise.
    velocity_noise_sigma: float | None = 0.1
    episodes: tuple[Episode, ...] = ()

    def __post_init__(self):
        sov = [c for c in self.coverages if c.owner is SensorOwner.SOV]
        sor = [c for c in self.coverages if c.owner is not SensorOwner.SOV]
        if len(sov) != 1:
            raise InvalidConfig("coverages", "exactly one SoV coverage required")
        if len(sor) > 1:
            raise InvalidConfig("coverages", "at most one SoR coverage allowed")
        if self.duration <= 0:
            raise InvalidConfig("duration", "must be > 0")
        if self.frame_period <= 0:
            raise InvalidConfig("frame_period", "must be > 0")
        if self.detection_noise_sigma < 0:
            raise InvalidConfig("detection_noise_sigma", "must be >= 0")
        if self.velocity_noise_sigma is not None and self.velocity_noise_sigma < 0:
            raise InvalidConfig("velocity_noise_sigma", "must be >= 0")
        if self.ego.duration < self.duration:
            raise InvalidConfig("ego", "trajectory shorter than the scenario")
        for oid, spec in self.objects.items():
            if spec.duration < self.duration:
                raise InvalidConfig(f"objects.{oid}", "trajectory shorter than the scenario")
        object.__setattr__(self, "objects", dict(sorted(self.objects.items())))

    @property
    def n_ticks(self) -> int:
        return micros(self.duration) // self.frame_period

    @property
    def object_ids(self) -> list[str]:
        return list(self.objects)

    def coverage(self, owner: SensorOwner | Source) -> SensorCoverage | None:
        for c in self.coverages:
            if c.owner is owner or c.owner.source is owner:
                return c
        return None

    @property
    def sov_coverage(self) -> SensorCoverage:
        return self.coverage(SensorOwner.SOV)

    @property
    def sor_coverage(self) -> SensorCoverage | None:
        return self.coverage(Source.SOR)

    def to_dict(self) -> dict[str, Any]:
        return _to_jsonable(self)

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _to_jsonable(obj: Any) -> Any:
    if isinstance(obj, Vec2):
        return [obj.x, obj.y]
    if isinstance(obj, enum.Enum):
        return obj.value
    if hasattr(obj, "__dataclass_fields__"):
        out: dict[str, Any] = {}
        if isinstance(obj, (Line, Arc)):
            out["type"] = type(obj).__name__.lower()
        for name in obj.__dataclass_fields__:
            out[name] = _to_jsonable(getattr(obj, name))
        return out
    if isinstance(obj, Mapping):
        return {k: _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    return obj


def true_state(scenario: Scenario, object_id: str, t: Micros) -> tuple[Vec2, Vec2]:
    """Exact (position, velocity) of an object at ``t`` microseconds."""
    try:
        spec = scenario.objects[object_id]
    except KeyError:
        raise UnknownObject(object_id) from None
    return spec.state_at(seconds(t))


def ego_state(scenario: Scenario, t: Micros) -> tuple[Vec2, Vec2]:
    return scenario.ego.state_at(seconds(t))


_OWNER_STREAM = {Source.SOV: 1, Source.SOR: 2}


def _noise_rng(seed: int, source: Source, stream_tick: int) -> np.random.Generator:
    return np.random.default_rng([seed % 2**64, _OWNER_STREAM[source], stream_tick])


def _position_noise(scenario: Scenario, seed: int, source: Source, tick: int) -> np.ndarray:
    # Stream index tick+1 so the finite-difference model can read a "tick -1" stream.
    rng = _noise_rng(seed, source, tick + 1)
    return rng.normal(0.0, 1.0, size=(len(scenario.objects), 2)) * scenario.detection_noise_sigma


def sense(scenario: Scenario, owner: SensorOwner | Source, tick: int, seed: int) -> PerceptionFrame:
    """Noisy perception frame of one side at ``tick``.

    Noise comes from a stream derived from (seed, side, tick), so any tick can be
    regenerated independently. Noise is drawn for every object whether or not it is
    visible, which keeps coverage comparisons between sensors noise-aligned.
    """
    cov = scenario.coverage(owner)
    source = owner.source if isinstance(owner, SensorOwner) else owner
    ts = tick * scenario.frame_period
    if cov is None or tick < 0 or tick >= scenario.n_ticks:
        if cov is None:
            raise InvalidConfig("coverages", f"no coverage configured for {owner}")
        raise TimeOutOfRange(f"tick {tick} outside scenario")
    mount = cov.mount if cov.mount is not None else ego_state(scenario, ts)[0]

    noise = _position_noise(scenario, seed, source, tick)
    dt = seconds(scenario.frame_period)
    if scenario.velocity_noise_sigma is None:
        prev = _position_noise(scenario, seed, source, tick - 1)
        vnoise = (noise - prev) / dt
    else:
        vrng = np.random.default_rng([seed % 2**64, _OWNER_STREAM[source] + 10, tick])
        vnoise = vrng.normal(0.0, 1.0, size=noise.shape) * scenario.velocity_noise_sigma

    detections = []
    for i, (oid, spec) in enumerate(scenario.objects.items()):
        pos, vel = spec.state_at(seconds(ts))
        if pos.dist(mount) >= cov.range - RANGE_EDGE_TOL:
            continue
        if any(r.contains(pos) for r in cov.blind_regions):
            continue
        detections.append(Detection(
            oid,
            Vec2(pos.x + noise[i, 0], pos.y + noise[i, 1]),
            Vec2(vel.x + vnoise[i, 0], vel.y + vnoise[i, 1]),
            source,
        ))
    return PerceptionFrame(tick, ts, source, tuple(detections))


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

_SOR_RANGES = {"light": (SensorOwner.SOR_LIGHT, SOR_LIGHT_RANGE), "heavy": (SensorOwner.SOR_HEAVY, SOR_HEAVY_RANGE)}
# Ground truth stays defined this long past the run so 5 s predictions can be scored.
TRUTH_MARGIN_S = 6.0


def _sor_coverage(sor: str | None, mount: Vec2, blind: tuple[Rect, ...] = ()) -> tuple[SensorCoverage, ...]:
    if sor in (None, "none"):
        return ()
    if sor not in _SOR_RANGES:
        raise InvalidConfig("scenario.sor", f"unknown SoR kind {sor!r}")
    owner, rng = _SOR_RANGES[sor]
    return (SensorCoverage(owner, rng, mount, blind),)


def approach(sor: str | None = None, lead_frames: int = 10, duration: float = 5.0, **kw: Any) -> Scenario:
    """Head-on closure at 1.4 m per frame toward a parked ego vehicle.

    The object starts ``lead_frames`` frames outside the largest coverage range,
    so after N detected frames the ego-object distance is ``range - 1.4 N``.
    """
    frame_period = kw.get("frame_period", DEFAULT_FRAME_PERIOD_US)
    speed = APPROACH_CLOSURE_PER_FRAME / seconds(frame_period)
    origin = Vec2(0.0, 0.0)
    covs = (SensorCoverage(SensorOwner.SOV, SOV_RANGE),) + _sor_coverage(sor, origin)
    reach = max(c.range for c in covs)
    start = Vec2(reach + APPROACH_CLOSURE_PER_FRAME * lead_frames, 0.0)
    total = duration + TRUTH_MARGIN_S
    return Scenario(
        name=f"approach-{sor or 'none'}",
        duration=duration,
        ego=stationary(origin, total),
        objects={"obj1": TrajectorySpec((Line(start, speed, math.pi, total),))},
        coverages=covs,
        **kw,
    )


def arc(sor: str | None = "light", radius: float = 50.0, speed: float = 10.0, duration: float = 10.0,
        **kw: Any) -> Scenario:
    """One object circling the parked ego vehicle at constant speed."""
    total = duration + TRUTH_MARGIN_S
    origin = Vec2(0.0, 0.0)
    obj = TrajectorySpec((Arc(origin, radius, speed / radius, 0.0, total),))
    covs = (SensorCoverage(SensorOwner.SOV, SOV_RANGE),) + _sor_coverage(sor, origin)
    return Scenario("arc", duration, stationary(origin, total), {"arc1": obj}, covs, **kw)


def _arc_box(radius: float, a0: float, a1: float, shrink: float = 0.01) -> Rect:
    phis = np.linspace(a0 + shrink, a1 - shrink, 64)
    xs, ys = radius * np.cos(phis), radius * np.sin(phis)
    return Rect(float(xs.min()), float(ys.min()), float(xs.max()), float(ys.max()))


LOOP_RADIUS = 40.0
LOOP_SPEED = 10.0
LOOP_SECTORS = 10
# Within each sector pair: an arc only the vehicle sees (region A), then one only the road sees (region B).
LOOP_A_FRACTION = 0.4


def _loop_regions() -> tuple[tuple[Rect, ...], tuple[Rect, ...]]:
    sov_blind, sor_blind = [], []
    pair = 2 * math.pi / LOOP_SECTORS
    for k in range(LOOP_SECTORS):
        a0 = k * pair
        a1 = a0 + LOOP_A_FRACTION * pair
        sor_blind.append(_arc_box(LOOP_RADIUS, a0, a1))
        sov_blind.append(_arc_box(LOOP_RADIUS, a1, a0 + pair))
    return tuple(sov_blind), tuple(sor_blind)


def complementary(duration: float = 15.0, n_objects: int = 4, far_object: bool = False,
                  episodes: tuple[Episode, ...] = (), name: str = "complementary", **kw: Any) -> Scenario:
    """Objects loop around the ego vehicle through alternating occluded arcs.

    On region-A arcs the roadside unit is occluded, on region-B arcs the vehicle
    is, so neither side alone sees a continuous history.
    """
    total = duration + TRUTH_MARGIN_S
    origin = Vec2(0.0, 0.0)
    w = LOOP_SPEED / LOOP_RADIUS
    objects = {
        f"car{i + 1}": TrajectorySpec((Arc(origin, LOOP_RADIUS, w, 2 * math.pi * i / n_objects + 0.1, total),))
        for i in range(n_objects)
    }
    if far_object:
        objects["far1"] = TrajectorySpec((Arc(origin, 120.0, LOOP_SPEED / 120.0, 0.3, total),))
    sov_blind, sor_blind = _loop_regions()
    covs = (
        SensorCoverage(SensorOwner.SOV, SOV_RANGE, None, sov_blind),
        SensorCoverage(SensorOwner.SOR_LIGHT, SOR_LIGHT_RANGE, Vec2(5.0, 5.0), sor_blind),
    )
    return Scenario(name, duration, stationary(origin, total), objects, covs, episodes=episodes, **kw)


def handover(duration: float = 15.0, period: float = 1.0, outage: float = 0.3, **kw: Any) -> Scenario:
    """Complementary loop plus an ``outage``-long link drop every ``period`` seconds (frequent handovers)."""
    eps = tuple(Episode.outage(t, outage) for t in np.arange(period, duration, period))
    return complementary(duration, far_object=True, episodes=eps, name="handover", **kw)


def tunnel(duration: float = 15.0, starts: tuple[float, ...] = (4.0, 10.0), outage: float = 2.0,
           **kw: Any) -> Scenario:
    """Complementary loop plus long outages (tunnel passages)."""
    eps = tuple(Episode.outage(t, outage) for t in starts if t < duration)
    return complementary(duration, far_object=True, episodes=eps, name="tunnel", **kw)


PRESETS = {
    "approach": approach,
    "arc": arc,
    "complementary": complementary,
    "handover": handover,
    "tunnel": tunnel,
}


# ---------------------------------------------------------------------------
# Config -> Scenario
# ---------------------------------------------------------------------------


def _vec(value: Any, path: str) -> Vec2:
    if not (isinstance(value, (list, tuple)) and len(value) == 2):
        raise InvalidConfig(path, "expected [x, y]")
    try:
        return Vec2(float(value[0]), float(value[1]))
    except (TypeError, ValueError) as exc:
        raise InvalidConfig(path, str(exc)) from None


def _num(d: Mapping[str, Any], key: str, path: str) -> float:
    if key not in d:
        raise InvalidConfig(f"{path}.{key}", "missing")
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise InvalidConfig(f"{path}.{key}", "expected a number")
    return float(v)


def _check_keys(d: Mapping[str, Any], allowed: set[str], path: str) -> None:
    for k in d:
        if k not in allowed:
            raise InvalidConfig(f"{path}.{k}", "unknown key")


def _segment(d: Mapping[str, Any], path: str) -> Segment:
    kind = d.get("type")
    if kind == "line":
        _check_keys(d, {"type", "start", "speed", "heading", "duration"}, path)
        return Line(_vec(d.get("start"), f"{path}.start"), _num(d, "speed", path), _num(d, "heading", path),
                    _num(d, "duration", path))
    if kind == "arc":
        _check_keys(d, {"type", "center", "radius", "angular_rate", "start_angle", "duration"}, path)
        return Arc(_vec(d.get("center"), f"{path}.center"), _num(d, "radius", path),
                   _num(d, "angular_rate", path), _num(d, "start_angle", path), _num(d, "duration", path))
    raise InvalidConfig(f"{path}.type", "expected 'line' or 'arc'")


def _trajectory(d: Any, path: str) -> TrajectorySpec:
    segs = d.get("segments") if isinstance(d, Mapping) else d
    if not isinstance(segs, list):
        raise InvalidConfig(path, "expected a list of segments")
    try:
        return TrajectorySpec(tuple(_segment(s, f"{path}.segments[{i}]") for i, s in enumerate(segs)))
    except InvalidConfig as exc:
        if exc.path.startswith(path):
            raise
        raise InvalidConfig(f"{path}.{exc.path}", str(exc).split(": ", 1)[-1]) from None


def _coverage(d: Mapping[str, Any], path: str) -> SensorCoverage:
    _check_keys(d, {"owner", "range", "mount", "blind_regions"}, path)
    try:
        owner = SensorOwner(d.get("owner"))
    except ValueError:
        raise InvalidConfig(f"{path}.owner", "expected SoV, SoRLight or SoRHeavy") from None
    mount = d.get("mount")
    blind = []
    for i, r in enumerate(d.get("blind_regions", [])):
        if not (isinstance(r, list) and len(r) == 4):
            raise InvalidConfig(f"{path}.blind_regions[{i}]", "expected [xmin, ymin, xmax, ymax]")
        blind.append(Rect(*(float(v) for v in r)))
    return SensorCoverage(owner, _num(d, "range", path), None if mount is None else _vec(mount, f"{path}.mount"),
                          tuple(blind))


def episode_from_dict(d: Mapping[str, Any], path: str) -> Episode:
    _check_keys(d, {"start", "duration", "kind", "extra_delay_ms"}, path)
    try:
        kind = EpisodeKind(d.get("kind", "outage"))
    except ValueError:
        raise InvalidConfig(f"{path}.kind", "expected outage or extra_delay") from None
    return Episode(micros(_num(d, "start", path)), micros(_num(d, "duration", path)), kind,
                   float(d.get("extra_delay_ms", 0.0)))


def build_scenario(config: str | Mapping[str, Any]) -> Scenario:
    """Resolve a preset name, ``{"preset": name, ...options}``, or an inline scenario spec."""
    path = "scenario"
    if isinstance(config, str):
        config = {"preset": config}
    if not isinstance(config, Mapping):
        raise InvalidConfig(path, "expected a preset name or an object")
    if "preset" in config:
        name = config["preset"]
        if name not in PRESETS:
            raise InvalidConfig(f"{path}.preset", f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
        opts = {k: v for k, v in config.items() if k != "preset"}
        try:
            return PRESETS[name](**opts)
        except TypeError as exc:
            raise InvalidConfig(path, f"bad option for preset {name!r}: {exc}") from None

    _check_keys(config, {"name", "duration", "ego", "objects", "coverages", "frame_period",
                         "detection_noise_sigma", "velocity_noise_sigma", "episodes"}, path)
    for key in ("duration", "ego", "coverages"):
        if key not in config:
            raise InvalidConfig(f"{path}.{key}", "missing")
    objects = config.get("objects", {})
    if not isinstance(objects, Mapping):
        raise InvalidConfig(f"{path}.objects", "expected a mapping of object id to trajectory")
    kw: dict[str, Any] = {}
    if "frame_period" in config:
        kw["frame_period"] = int(_num(config, "frame_period", path))
    if "detection_noise_sigma" in config:
        kw["detection_noise_sigma"] = _num(config, "detection_noise_sigma", path)
    if "velocity_noise_sigma" in config:
        v = config["velocity_noise_sigma"]
        kw["velocity_noise_sigma"] = None if v is None else _num(config, "velocity_noise_sigma", path)
    return Scenario(
        name=str(config.get("name", "inline")),
        duration=_num(config, "duration", path),
        ego=_trajectory(config["ego"], f"{path}.ego"),
        objects={str(k): _trajectory(v, f"{path}.objects.{k}") for k, v in objects.items()},
        coverages=tuple(_coverage(c, f"{path}.coverages[{i}]") for i, c in enumerate(config["coverages"])),
        episodes=tuple(episode_from_dict(e, f"{path}.episodes[{i}]") for i, e in enumerate(config.get("episodes", []))),
        **kw,
    )
