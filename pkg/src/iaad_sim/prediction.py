"""Tracking bookkeeping, the light (constant velocity) and heavy (CTRV) predictors,
and the mean displacement error metric."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import (
    DEFAULT_FRAME_PERIOD_US,
    HEAVY_HORIZON_US,
    LIGHT_HORIZON_US,
    TRACK_CAPACITY,
    Micros,
    PerceptionFrame,
    PredictedTrajectory,
    Track,
    TrackState,
    Vec2,
    US_PER_S,
)
from .errors import EmptyPredictionSet, InsufficientHistory, StaleFrame
from .scenario import Scenario, true_state

LIGHT_WINDOW = 5
HEAVY_WINDOW = 20  # the 20-frame prediction window
LIGHT_MIN_STATES = 2
HEAVY_MIN_STATES = 10

_SMALL_TURN = 1e-4
_MAX_GN_ITERS = 12


class Tracker:
    """Per-object tracks keyed by ground-truth identity.

    ``timeout`` drops a track once it has gone that long without an update;
    ``None`` keeps tracks for the whole run.
    """

    def __init__(self, capacity: int = TRACK_CAPACITY, timeout: Micros | None = None):
        self.capacity = capacity
        self.timeout = timeout
        self.tracks: dict[str, Track] = {}
        self.last_update: Micros | None = None
        self.last_update_tick: int | None = None

    def update(self, frame: PerceptionFrame) -> Tracker:
        if self.last_update is not None and frame.timestamp <= self.last_update:
            raise StaleFrame(f"frame at {frame.timestamp} us is not after {self.last_update} us")
        for det in frame.detections:
            if det.object_id is None:
                continue
            track = self.tracks.get(det.object_id)
            if track is None:
                track = self.tracks[det.object_id] = Track(det.object_id, self.capacity)
            track.append(TrackState(frame.timestamp, det.position, det.velocity))
        self.last_update = frame.timestamp
        self.last_update_tick = frame.tick
        if self.timeout is not None:
            cutoff = frame.timestamp - self.timeout
            for oid in [k for k, tr in self.tracks.items() if tr.last_time < cutoff]:
                del self.tracks[oid]
        return self

    def __len__(self) -> int:
        return len(self.tracks)


TrackerState = Tracker


def update_tracks(state: Tracker, fused_frame: PerceptionFrame) -> Tracker:
    return state.update(fused_frame)


def _arrays(states: Sequence[TrackState], t_ref: Micros) -> tuple[np.ndarray, np.ndarray]:
    t = np.array([(s.t - t_ref) / US_PER_S for s in states])
    xy = np.array([[s.position.x, s.position.y] for s in states])
    return t, xy


@dataclass(frozen=True)
class ConstantVelocity:
    t_ref: Micros
    position: Vec2
    velocity: Vec2

    def position_at(self, t: Micros) -> Vec2:
        dt = (t - self.t_ref) / US_PER_S
        return Vec2(self.position.x + self.velocity.x * dt, self.position.y + self.velocity.y * dt)


@dataclass(frozen=True)
class ConstantTurn:
    """Constant turn rate and speed; ``heading`` and ``position`` are at ``t_ref``."""

    t_ref: Micros
    position: Vec2
    speed: float
    heading: float
    turn_rate: float

    def position_at(self, t: Micros) -> Vec2:
        tau = np.array([(t - self.t_ref) / US_PER_S])
        xy = _ctrv_xy(self.position.x, self.position.y, self.heading, self.speed, self.turn_rate, tau)
        return Vec2(float(xy[0, 0]), float(xy[0, 1]))


def fit_constant_velocity(states: Sequence[TrackState], window: int = LIGHT_WINDOW) -> ConstantVelocity:
    """Least-squares line through the most recent ``window`` positions, anchored at the newest time."""
    if len(states) < 1:
        raise InsufficientHistory("no states to fit")
    recent = list(states)[-window:]
    t_ref = recent[-1].t
    t, xy = _arrays(recent, t_ref)
    tc = t - t.mean()
    sxx = float(tc @ tc)
    mean_xy = xy.mean(axis=0)
    if sxx == 0.0:
        vel = np.zeros(2)
    else:
        vel = tc @ (xy - mean_xy) / sxx
    pos = mean_xy - vel * t.mean()
    return ConstantVelocity(t_ref, Vec2(float(pos[0]), float(pos[1])), Vec2(float(vel[0]), float(vel[1])))


def _turn_terms(w: float, tau: np.ndarray) -> tuple[np.ndarray, ...]:
    """f = sin(w tau)/w, g = (1 - cos(w tau))/w and their w-derivatives, stable at w -> 0."""
    if abs(w) < _SMALL_TURN:
        t2, t3 = tau * tau, tau * tau * tau
        f = tau - w * w * t3 / 6.0
        g = w * t2 / 2.0 - w ** 3 * t2 * t2 / 24.0
        df = -w * t3 / 3.0
        dg = t2 / 2.0 - w * w * t2 * t2 / 8.0
        return f, g, df, dg
    s, c = np.sin(w * tau), np.cos(w * tau)
    f = s / w
    g = (1.0 - c) / w
    df = (tau * c * w - s) / (w * w)
    dg = (tau * s * w - (1.0 - c)) / (w * w)
    return f, g, df, dg


def _ctrv_xy(x0: float, y0: float, th: float, v: float, w: float, tau: np.ndarray) -> np.ndarray:
    f, g, _, _ = _turn_terms(w, tau)
    c, s = math.cos(th), math.sin(th)
    return np.stack([x0 + v * (c * f - s * g), y0 + v * (s * f + c * g)], axis=1)


def fit_ctrv(states: Sequence[TrackState], window: int = HEAVY_WINDOW) -> ConstantTurn:
    """Gauss-Newton least-squares CTRV fit to the most recent ``window`` positions.

    Starts from the constant-velocity fit (zero turn rate) and falls back to it when
    the object is effectively stationary or the iteration does not reduce the cost.
    """
    recent = list(states)[-window:]
    cv = fit_constant_velocity(recent, window)
    t_ref = recent[-1].t
    tau, z = _arrays(recent, t_ref)
    speed = cv.velocity.norm()
    fallback = ConstantTurn(t_ref, cv.position, speed, math.atan2(cv.velocity.y, cv.velocity.x), 0.0)
    if speed < 1e-3 or len(recent) < 4:
        return fallback

    p = np.array([cv.position.x, cv.position.y, fallback.heading, speed, 0.0])

    def residual(p: np.ndarray) -> np.ndarray:
        return (_ctrv_xy(p[0], p[1], p[2], p[3], p[4], tau) - z).ravel(order="F")

    r = residual(p)
    cost = float(r @ r)
    cost0 = cost
    n = len(tau)
    for _ in range(_MAX_GN_ITERS):
        x0, y0, th, v, w = p
        f, g, df, dg = _turn_terms(w, tau)
        c, s = math.cos(th), math.sin(th)
        J = np.zeros((2 * n, 5))
        J[:n, 0] = 1.0
        J[n:, 1] = 1.0
        J[:n, 2] = v * (-s * f - c * g)
        J[n:, 2] = v * (c * f - s * g)
        J[:n, 3] = c * f - s * g
        J[n:, 3] = s * f + c * g
        J[:n, 4] = v * (c * df - s * dg)
        J[n:, 4] = v * (s * df + c * dg)
        JtJ = J.T @ J
        step = np.linalg.solve(JtJ + 1e-9 * np.diag(np.diag(JtJ) + 1e-12), -J.T @ r)
        p_new = p + step
        r_new = residual(p_new)
        cost_new = float(r_new @ r_new)
        if cost_new > cost:
            break
        p, r, cost = p_new, r_new, cost_new
        if np.max(np.abs(step)) < 1e-10:
            break
    if not np.all(np.isfinite(p)) or cost > cost0:
        return fallback
    x0, y0, th, v, w = (float(q) for q in p)
    if v < 0:
        v, th = -v, th + math.pi
    return ConstantTurn(t_ref, Vec2(x0, y0), v, math.atan2(math.sin(th), math.cos(th)), w)


def _sample(model: ConstantVelocity | ConstantTurn, object_id: str | None, issued_at: Micros,
            horizon: Micros, frame_period: Micros) -> PredictedTrajectory:
    n = horizon // frame_period
    times = [issued_at + k * frame_period for k in range(1, n + 1)]
    if isinstance(model, ConstantTurn):
        tau = np.array([(t - model.t_ref) / US_PER_S for t in times])
        xy = _ctrv_xy(model.position.x, model.position.y, model.heading, model.speed, model.turn_rate, tau)
        pts = tuple((t, Vec2(float(a), float(b))) for t, (a, b) in zip(times, xy))
    else:
        pts = tuple((t, model.position_at(t)) for t in times)
    return PredictedTrajectory(object_id, issued_at, horizon, pts)


def light_predict(track: Track, now: Micros, frame_period: Micros = DEFAULT_FRAME_PERIOD_US,
                  window: int = LIGHT_WINDOW) -> PredictedTrajectory:
    """0.5 s constant-velocity prediction, one point per frame period."""
    if len(track) < LIGHT_MIN_STATES:
        raise InsufficientHistory(f"light prediction needs {LIGHT_MIN_STATES} states, track has {len(track)}")
    model = fit_constant_velocity(track.states, window)
    return _sample(model, track.object_id, now, LIGHT_HORIZON_US, frame_period)


def heavy_predict(track: Track, now: Micros, frame_period: Micros = DEFAULT_FRAME_PERIOD_US,
                  window: int = HEAVY_WINDOW) -> PredictedTrajectory:
    """5 s CTRV prediction over the 20-state window, one point per frame period."""
    if len(track) < HEAVY_MIN_STATES:
        raise InsufficientHistory(f"heavy prediction needs {HEAVY_MIN_STATES} states, track has {len(track)}")
    model = fit_ctrv(track.states, window)
    return _sample(model, track.object_id, now, HEAVY_HORIZON_US, frame_period)


def displacement_error(predicted: Iterable[PredictedTrajectory], scenario: Scenario, eval_time: Micros) -> float:
    """Mean Euclidean distance between predicted and true object locations at ``eval_time``."""
    errors = []
    for traj in predicted:
        guess = traj.position_at(eval_time)
        truth, _ = true_state(scenario, traj.object_id, eval_time)
        errors.append(guess.dist(truth))
    if not errors:
        raise EmptyPredictionSet("no predictions to score")
    return sum(errors) / len(errors)
