"""The three SoR-to-SoV fusion mechanisms and the adaptive mode selector."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .core import (
    Detection,
    FusionMode,
    Micros,
    PerceptionFrame,
    PredictedTrajectory,
    Source,
    Vec2,
    US_PER_S,
)
from .errors import (
    BufferEmpty,
    InvalidConfig,
    NoValidHeavyPrediction,
    StalenessExceeded,
    TickMismatch,
)


class PolicyMode(str, enum.Enum):
    INTRA_ONLY = "intra"
    INTER_ENABLED = "inter"
    PLANNING_ONLY = "planning"
    ADAPTIVE = "adaptive"


@dataclass(frozen=True)
class PolicyConfig:
    mode: PolicyMode = PolicyMode.ADAPTIVE
    inter_tolerance: Micros = 600_000
    heavy_validity: Micros = 5_000_000
    dedup_gate: float = 1.0  # m
    extrapolate_stale: bool = True
    # Consecutive on-time arrivals needed to return to intra fusion after a fallback.
    switch_back_hysteresis: int = 0
    # Track retention on each side; the SoR tracker drops an object soon after losing it.
    sov_track_timeout: Micros = 5_000_000
    sor_track_timeout: Micros = 300_000

    def __post_init__(self):
        if not isinstance(self.mode, PolicyMode):
            object.__setattr__(self, "mode", PolicyMode(self.mode))
        if self.inter_tolerance < 0:
            raise InvalidConfig("policy.inter_tolerance", "must be >= 0")
        if self.inter_tolerance >= self.heavy_validity:
            raise InvalidConfig("policy.inter_tolerance", "must be < heavy_validity")
        if self.dedup_gate <= 0:
            raise InvalidConfig("policy.dedup_gate", "must be > 0")
        if self.switch_back_hysteresis < 0:
            raise InvalidConfig("policy.switch_back_hysteresis", "must be >= 0")
        for name in ("sov_track_timeout", "sor_track_timeout"):
            if getattr(self, name) <= 0:
                raise InvalidConfig(f"policy.{name}", "must be > 0")


@dataclass
class SorBuffer:
    """Newest SoR items by source tick; late arrivals of older ticks are ignored."""

    post_perception: PerceptionFrame | None = None
    post_arrival: Micros | None = None
    heavy: tuple[PredictedTrajectory, ...] | None = None
    heavy_tick: int | None = None
    heavy_issued_at: Micros | None = None
    heavy_arrival: Micros | None = None
    # Newest SoR tick already fused into a SoV frame; each frame is fused at most once.
    consumed_tick: int | None = None

    def offer_post(self, frame: PerceptionFrame, arrival: Micros) -> None:
        if self.post_perception is None or frame.tick > self.post_perception.tick:
            self.post_perception = frame
            self.post_arrival = arrival

    def offer_heavy(self, tick: int, issued_at: Micros, trajectories: tuple[PredictedTrajectory, ...],
                    arrival: Micros) -> None:
        if self.heavy_tick is None or tick > self.heavy_tick:
            self.heavy = tuple(trajectories)
            self.heavy_tick = tick
            self.heavy_issued_at = issued_at
            self.heavy_arrival = arrival

    def mark_consumed(self, tick: int) -> None:
        if self.consumed_tick is None or tick > self.consumed_tick:
            self.consumed_tick = tick

    def fresh_post(self) -> bool:
        """True when the buffered frame has not been fused yet."""
        return self.post_perception is not None and (
            self.consumed_tick is None or self.post_perception.tick > self.consumed_tick
        )

    def staleness(self, now: Micros) -> Micros | None:
        if self.post_perception is None:
            return None
        return now - self.post_perception.timestamp

    def valid_heavy(self, now: Micros, validity: Micros) -> tuple[PredictedTrajectory, ...]:
        if not self.heavy or self.heavy_issued_at is None:
            return ()
        if now - self.heavy_issued_at > validity:
            return ()
        return self.heavy


def _sort_key(d: Detection) -> tuple[bool, str]:
    return (d.object_id is None, d.object_id or "")


def dedup_detections(detections: list[Detection] | tuple[Detection, ...], gate: float = 1.0) -> list[Detection]:
    """Merge duplicate detections, keeping the SoV measurement on conflict.

    Identity decides first: detections with equal ids merge, distinct ids never do.
    The distance gate only applies to detections without an id.
    """
    if gate <= 0:
        raise ValueError("gate must be > 0")
    by_id: dict[str, Detection] = {}
    anonymous: list[Detection] = []
    for d in detections:
        if d.object_id is None:
            anonymous.append(d)
            continue
        cur = by_id.get(d.object_id)
        if cur is None or (cur.source is Source.SOR and d.source is Source.SOV):
            by_id[d.object_id] = d
    kept = list(by_id.values())
    for d in anonymous:
        near = [(k.position.dist(d.position), i) for i, k in enumerate(kept) if k.position.dist(d.position) <= gate]
        if not near:
            kept.append(d)
            continue
        _, i = min(near)
        other = kept[i]
        if d.source is Source.SOV and other.source is Source.SOR:
            kept[i] = Detection(other.object_id, d.position, d.velocity, d.source)
    return sorted(kept, key=_sort_key)


def _fused(sov: PerceptionFrame, extra: tuple[Detection, ...], gate: float) -> PerceptionFrame:
    merged = dedup_detections(list(sov.detections) + list(extra), gate)
    return PerceptionFrame(sov.tick, sov.timestamp, Source.SOV, tuple(merged), fused=True)


def intra_frame_fuse(sov: PerceptionFrame, sor: PerceptionFrame, gate: float = 1.0) -> PerceptionFrame:
    if sov.tick != sor.tick:
        raise TickMismatch(f"SoV tick {sov.tick} vs SoR tick {sor.tick}")
    return _fused(sov, sor.detections, gate)


def compensate(detections: tuple[Detection, ...], dt: Micros) -> tuple[Detection, ...]:
    """Advance detections by constant velocity over ``dt`` microseconds."""
    s = dt / US_PER_S
    return tuple(
        Detection(d.object_id, Vec2(d.position.x + d.velocity.x * s, d.position.y + d.velocity.y * s),
                  d.velocity, d.source)
        for d in detections
    )


def inter_frame_fuse(sov: PerceptionFrame, buffer: SorBuffer, now: Micros,
                     cfg: PolicyConfig) -> tuple[PerceptionFrame, Micros]:
    """Fuse the newest buffered SoR frame into ``sov``; returns the frame and the staleness used.

    A frame that was already fused (intra or inter) is not fused again: repeating a
    measurement would double-count its noise, so the SoV frame passes through unchanged.
    """
    stale = buffer.staleness(now)
    if stale is None:
        raise BufferEmpty("no buffered SoR frame")
    if stale < 0:
        raise ValueError("buffered SoR frame is newer than now")
    if stale > cfg.inter_tolerance:
        raise StalenessExceeded(f"staleness {stale} us > tolerance {cfg.inter_tolerance} us")
    if not buffer.fresh_post():
        return sov, stale
    buffer.mark_consumed(buffer.post_perception.tick)
    dets = buffer.post_perception.detections
    if cfg.extrapolate_stale and stale > 0:
        dets = compensate(dets, stale)
    return _fused(sov, dets, cfg.dedup_gate), stale


def planning_fuse(local: list[PredictedTrajectory] | tuple[PredictedTrajectory, ...], buffer: SorBuffer,
                  now: Micros, cfg: PolicyConfig) -> list[PredictedTrajectory]:
    """Planning set with SoR heavy trajectories taking precedence over local ones.

    SoR trajectories are consumed exactly as issued.
    """
    heavy = buffer.valid_heavy(now, cfg.heavy_validity)
    if not heavy:
        raise NoValidHeavyPrediction("no heavy prediction within its validity window")
    out = {t.object_id: t for t in local}
    out.update({t.object_id: t for t in heavy})
    return [out[k] for k in sorted(out, key=lambda k: (k is None, k or ""))]


def select_mode(arrived: bool, buffer: SorBuffer, now: Micros, cfg: PolicyConfig) -> FusionMode:
    """Fallback ladder: Intra, then Inter, then Planning, then no fusion.

    ``arrived`` says whether the matching-tick SoR frame made the wait window.
    Non-adaptive policies use the prefix of the ladder they allow.
    """
    mode = cfg.mode
    if mode is PolicyMode.PLANNING_ONLY:
        return FusionMode.PLANNING if buffer.valid_heavy(now, cfg.heavy_validity) else FusionMode.NO_FUSION
    if arrived:
        return FusionMode.INTRA
    if mode is PolicyMode.INTRA_ONLY:
        return FusionMode.NO_FUSION
    stale = buffer.staleness(now)
    if stale is not None and 0 <= stale <= cfg.inter_tolerance:
        return FusionMode.INTER
    if mode is PolicyMode.ADAPTIVE and buffer.valid_heavy(now, cfg.heavy_validity):
        return FusionMode.PLANNING
    return FusionMode.NO_FUSION
