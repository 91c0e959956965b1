import math

import numpy as np
import pytest

from iaad_sim.core import PredictedTrajectory, Source, Track, TrackState, Vec2
from iaad_sim.errors import EmptyPredictionSet, HorizonExceeded, InsufficientHistory, StaleFrame
from iaad_sim.prediction import (
    Tracker,
    displacement_error,
    fit_constant_velocity,
    fit_ctrv,
    heavy_predict,
    light_predict,
    update_tracks,
)
from iaad_sim.scenario import Line, Scenario, SensorCoverage, SensorOwner, TrajectorySpec, stationary

from conftest import det, frame

DT = 100_000


def line_track(n, speed=14.0, heading=0.0, noise=0.0, seed=0):
    rng = np.random.default_rng(seed)
    c, s = math.cos(heading), math.sin(heading)
    states = []
    for k in range(n):
        e = rng.normal(0, noise, 2) if noise else (0.0, 0.0)
        t = k * DT / 1e6
        states.append(TrackState(k * DT, Vec2(speed * c * t + e[0], speed * s * t + e[1]), Vec2(speed * c, speed * s)))
    return Track.from_states("a", states)


def arc_track(n, r=50.0, w=0.2, t0=0):
    states = []
    for k in range(n):
        t = (t0 + k * DT) / 1e6
        states.append(TrackState(t0 + k * DT, Vec2(r * math.cos(w * t), r * math.sin(w * t)),
                                 Vec2(-r * w * math.sin(w * t), r * w * math.cos(w * t))))
    return Track.from_states("a", states)


def test_tracker_creation_capacity_and_stale():
    tr = Tracker()
    update_tracks(tr, frame(0, [det("a", 0, 0), det("b", 5, 5)]))
    assert {k: len(v) for k, v in tr.tracks.items()} == {"a": 1, "b": 1}
    for k in range(1, 30):
        tr.update(frame(k, [det("a", k, 0)]))
    assert len(tr.tracks["a"]) == 25
    assert tr.last_update_tick == 29
    with pytest.raises(StaleFrame):
        tr.update(frame(29, [det("a", 0, 0)]))


def test_tracker_timeout_drops_idle_tracks():
    tr = Tracker(timeout=300_000)
    tr.update(frame(0, [det("a", 0, 0), det("b", 0, 0)]))
    for k in range(1, 5):
        tr.update(frame(k, [det("a", k, 0)]))
    assert set(tr.tracks) == {"a"}


def test_light_predict_line_is_exact():
    tr = line_track(8)
    p = light_predict(tr, tr.last_time, DT)
    assert len(p.points) == 5 and p.horizon == 500_000
    assert p.points[-1][0] == tr.last_time + 500_000
    for t, pos in p.points:
        assert pos.x == pytest.approx(14.0 * t / 1e6, abs=1e-9)
        assert pos.y == pytest.approx(0.0, abs=1e-9)


def test_light_predict_errors_and_window():
    with pytest.raises(InsufficientHistory):
        light_predict(line_track(1), 0, DT)
    two = light_predict(line_track(2), 100_000, DT)
    assert two.points[0][1].x == pytest.approx(2.8)
    # only the newest 5 states count: a kink before them is invisible
    states = [TrackState(k * DT, Vec2(0.0, 0.0), Vec2(0, 0)) for k in range(5)]
    states += [TrackState((5 + k) * DT, Vec2(1.0 * (k + 1), 0.0), Vec2(10, 0)) for k in range(5)]
    cv = fit_constant_velocity(states, 5)
    assert cv.velocity.x == pytest.approx(10.0)


def test_coincident_states_give_zero_velocity():
    states = [TrackState(0, Vec2(1, 1), Vec2(0, 0))]
    assert fit_constant_velocity(states).velocity == Vec2(0, 0)


def test_heavy_predict_arc_stays_on_arc():
    tr = arc_track(20)
    p = heavy_predict(tr, tr.last_time, DT)
    assert len(p.points) == 50 and p.horizon == 5_000_000
    for t, pos in p.points:
        assert pos.norm() == pytest.approx(50.0, abs=1e-6)
        ang = 0.2 * t / 1e6
        assert pos.dist(Vec2(50 * math.cos(ang), 50 * math.sin(ang))) < 1e-6


def test_heavy_degenerates_to_cv_on_line():
    tr = line_track(20, heading=0.7)
    ctrv = fit_ctrv(tr.states)
    assert abs(ctrv.turn_rate) < 1e-8
    h = heavy_predict(tr, tr.last_time, DT)
    l = light_predict(tr, tr.last_time, DT)
    for (t1, a), (t2, b) in zip(h.points, l.points):
        assert t1 == t2 and a.dist(b) < 1e-6


def test_heavy_needs_ten_states():
    with pytest.raises(InsufficientHistory):
        heavy_predict(arc_track(9), 800_000, DT)
    heavy_predict(arc_track(10), 900_000, DT)


def test_light_arc_divergence():
    tr = arc_track(20)
    cv = fit_constant_velocity(tr.states)
    truth = lambda t: Vec2(50 * math.cos(0.2 * t / 1e6), 50 * math.sin(0.2 * t / 1e6))
    near = cv.position_at(tr.last_time + 500_000).dist(truth(tr.last_time + 500_000))
    far = cv.position_at(tr.last_time + 5_000_000).dist(truth(tr.last_time + 5_000_000))
    # centripetal drift 0.5 * r * w^2 * t^2 grows quadratically with lookahead
    assert near < 1.0 and far > 10 * near


def _one_object_scenario():
    obj = TrajectorySpec((Line(Vec2(0, 0), 0.0, 0.0, 10.0),))
    obj2 = TrajectorySpec((Line(Vec2(10, 0), 0.0, 0.0, 10.0),))
    return Scenario("de", 5.0, stationary(Vec2(0, 0), 10.0), {"a": obj, "b": obj2},
                    (SensorCoverage(SensorOwner.SOV, 70.0),))


def test_displacement_error_cases():
    sc = _one_object_scenario()
    exact = PredictedTrajectory("a", 0, 500_000, ((500_000, Vec2(0, 0)),))
    assert displacement_error([exact], sc, 500_000) == 0.0
    off = PredictedTrajectory("a", 0, 500_000, ((500_000, Vec2(3, 4)),))
    assert displacement_error([off], sc, 500_000) == 5.0
    one = PredictedTrajectory("a", 0, 500_000, ((500_000, Vec2(1, 0)),))
    three = PredictedTrajectory("b", 0, 500_000, ((500_000, Vec2(13, 0)),))
    assert displacement_error([one, three], sc, 500_000) == pytest.approx(2.0)
    assert displacement_error([three, one], sc, 500_000) == displacement_error([one, three], sc, 500_000)
    with pytest.raises(EmptyPredictionSet):
        displacement_error([], sc, 500_000)
    with pytest.raises(HorizonExceeded):
        displacement_error([off], sc, 600_000)


def test_light_extrapolation_error_oracle():
    # Oracle: the LS line through 5 equally spaced points, extrapolated 5 steps past the newest,
    # has per-axis variance sigma^2 * (1/5 + (2 + 5)^2 / 10) = 5.1 sigma^2.
    sigma = 0.5
    errs = []
    for seed in range(3000):
        tr = line_track(5, noise=sigma, seed=seed)
        p = fit_constant_velocity(tr.states).position_at(tr.last_time + 500_000)
        errs.append(p.x - 14.0 * (tr.last_time + 500_000) / 1e6)
    assert np.var(errs) == pytest.approx(5.1 * sigma ** 2, rel=0.08)
