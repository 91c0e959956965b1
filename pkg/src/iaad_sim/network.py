"""RSU to OBU channel model: uniform jitter band, latency spikes, loss, scheduled episodes.

Outcomes are ``int | None``: latency in microseconds when delivered, ``None`` when lost.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .core import Micros, US_PER_MS, micros
from .errors import InvalidConfig, NonMonotonicSend, ParseError, TraceExhausted

# Message streams carried per SoR tick.
POST_PERCEPTION = "post_perception"
HEAVY = "heavy"
STREAMS = (POST_PERCEPTION, HEAVY)
_STREAM_CODE = {POST_PERCEPTION: 1, HEAVY: 2}


class EpisodeKind(str, enum.Enum):
    OUTAGE = "outage"
    EXTRA_DELAY = "extra_delay"


@dataclass(frozen=True)
class Episode:
    start: Micros
    duration: Micros
    kind: EpisodeKind = EpisodeKind.OUTAGE
    extra_delay_ms: float = 0.0

    def __post_init__(self):
        if self.start < 0 or self.duration <= 0:
            raise InvalidConfig("episodes", "episode needs start >= 0 and duration > 0")
        if self.kind is EpisodeKind.EXTRA_DELAY and self.extra_delay_ms < 0:
            raise InvalidConfig("episodes", "extra delay must be >= 0")

    @property
    def end(self) -> Micros:
        return self.start + self.duration

    def contains(self, t: Micros) -> bool:
        return self.start <= t < self.end

    @classmethod
    def outage(cls, start_s: float, duration_s: float) -> Episode:
        return cls(micros(start_s), micros(duration_s), EpisodeKind.OUTAGE)


@dataclass(frozen=True)
class LinkModel:
    base_low: float = 15.0  # ms
    base_high: float = 35.0  # ms
    spike_prob: float = 0.0
    spike_low: float = 20.0  # ms, added on top of the base draw
    spike_high: float = 80.0  # ms
    loss_prob: float = 0.0
    episodes: tuple[Episode, ...] = ()

    def __post_init__(self):
        if not 0 <= self.base_low <= self.base_high:
            raise InvalidConfig("link.base_low", "need 0 <= base_low <= base_high")
        if not 0 <= self.spike_low <= self.spike_high:
            raise InvalidConfig("link.spike_low", "need 0 <= spike_low <= spike_high")
        for name in ("spike_prob", "loss_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InvalidConfig(f"link.{name}", "probability must be in [0, 1]")
        eps = tuple(sorted(self.episodes, key=lambda e: e.start))
        for a, b in zip(eps, eps[1:]):
            if b.start < a.end:
                raise InvalidConfig("link.episodes", "episodes overlap")
        object.__setattr__(self, "episodes", eps)

    def episode_at(self, t: Micros) -> Episode | None:
        for ep in self.episodes:
            if ep.start > t:
                return None
            if ep.contains(t):
                return ep
        return None

    def with_episodes(self, extra: Iterable[Episode]) -> LinkModel:
        return replace(self, episodes=tuple(self.episodes) + tuple(extra))


# Calibrated so a 35 ms wait window misses 0.05 + 0.95 * 0.25 = 28.75% of frames.
FIELD_MODEL = LinkModel(15.0, 35.0, spike_prob=0.25, spike_low=20.0, spike_high=80.0, loss_prob=0.05)
PERFECT_MODEL = LinkModel(0.0, 0.0)


def sample_outcome(model: LinkModel, send_time: Micros, rng: np.random.Generator) -> Micros | None:
    # Always consume four variates so the stream position does not depend on branches.
    u_loss, u_base, u_spike, u_extra = rng.random(4)
    ep = model.episode_at(send_time)
    if ep is not None and ep.kind is EpisodeKind.OUTAGE:
        return None
    if u_loss < model.loss_prob:
        return None
    lat = model.base_low + u_base * (model.base_high - model.base_low)
    if u_spike < model.spike_prob:
        lat += model.spike_low + u_extra * (model.spike_high - model.spike_low)
    if ep is not None and ep.kind is EpisodeKind.EXTRA_DELAY:
        lat += ep.extra_delay_ms
    return max(1, int(round(lat * US_PER_MS)))


def analytic_miss_ratio(model: LinkModel, wait_window: float, n_samples: int = 1_000_000,
                        seed: int = 0) -> tuple[float, float]:
    """Monte-Carlo P(lost or latency > wait_window ms) outside episodes.

    Vectorised directly from the mixture definition, independently of
    :func:`sample_outcome`. Returns ``(estimate, standard_error)``.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    lost = rng.random(n_samples) < model.loss_prob
    lat = rng.uniform(model.base_low, model.base_high, n_samples)
    spiked = rng.random(n_samples) < model.spike_prob
    lat = lat + spiked * rng.uniform(model.spike_low, model.spike_high, n_samples)
    miss = lost | (lat > wait_window)
    p = float(miss.mean())
    return p, math.sqrt(p * (1.0 - p) / n_samples)


@dataclass
class LatencyTrace:
    """Per-stream record of (send_tick, latency_us or None)."""

    entries: list[tuple[int, Micros | None]] = field(default_factory=list)

    def append(self, tick: int, outcome: Micros | None) -> None:
        if self.entries and tick <= self.entries[-1][0]:
            raise ValueError(f"trace ticks must increase (got {tick} after {self.entries[-1][0]})")
        if outcome is not None and outcome <= 0:
            raise ValueError("delivered latency must be > 0")
        self.entries.append((tick, outcome))

    def __len__(self) -> int:
        return len(self.entries)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["tick", "outcome", "latency_us"])
        for tick, lat in self.entries:
            w.writerow([tick, "L", ""] if lat is None else [tick, "D", lat])
        return buf.getvalue()

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")

    @classmethod
    def from_csv(cls, text: str) -> LatencyTrace:
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip() for c in rows[0]] != ["tick", "outcome", "latency_us"]:
            raise ParseError("trace header must be 'tick,outcome,latency_us'", 1)
        trace = cls()
        for lineno, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            try:
                tick_s, outcome, lat_s = row
                tick = int(tick_s)
                if outcome == "L" and lat_s == "":
                    trace.append(tick, None)
                elif outcome == "D":
                    trace.append(tick, int(lat_s))
                else:
                    raise ValueError(f"bad outcome {outcome!r}")
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
        return trace

    @classmethod
    def read(cls, path: str | Path) -> LatencyTrace:
        return cls.from_csv(Path(path).read_text(encoding="utf-8"))


class SyntheticLink:
    """Samples each stream from its own seeded generator."""

    def __init__(self, model: LinkModel, seed: int):
        self.model = model
        self._rngs = {s: np.random.default_rng([seed % 2**64, 7, code]) for s, code in _STREAM_CODE.items()}

    def outcome(self, stream: str, tick: int, send_time: Micros) -> Micros | None:
        return sample_outcome(self.model, send_time, self._rngs[stream])


class TraceLink:
    """Replays recorded outcomes by tick; the RNG and link model are ignored."""

    def __init__(self, traces: Mapping[str, LatencyTrace] | LatencyTrace):
        if isinstance(traces, LatencyTrace):
            traces = {s: traces for s in STREAMS}
        self._by_tick = {s: dict(t.entries) for s, t in traces.items()}

    def outcome(self, stream: str, tick: int, send_time: Micros) -> Micros | None:
        table = self._by_tick.get(stream, {})
        if tick not in table:
            raise TraceExhausted(f"no {stream} trace entry for tick {tick}")
        return table[tick]


def replay_from_trace(trace: Mapping[str, LatencyTrace] | LatencyTrace) -> TraceLink:
    return TraceLink(trace)


class Channel:
    """One message stream over a link; records every outcome into a trace."""

    def __init__(self, link: SyntheticLink | TraceLink, stream: str):
        self.link = link
        self.stream = stream
        self.trace = LatencyTrace()
        self._last_send: Micros | None = None

    def transmit(self, tick: int, send_time: Micros) -> Micros | None:
        """Arrival time of the message, or ``None`` if lost."""
        if self._last_send is not None and send_time < self._last_send:
            raise NonMonotonicSend(f"{self.stream}: send at {send_time} us before {self._last_send} us")
        self._last_send = send_time
        lat = self.link.outcome(self.stream, tick, send_time)
        self.trace.append(tick, lat)
        return None if lat is None else send_time + lat
