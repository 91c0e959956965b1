from hypothesis import given, settings
from hypothesis import strategies as st

from iaad_sim.core import FusionMode, PerceptionFrame, Source, Track, TrackState, Vec2
from iaad_sim.errors import StaleFrame
from iaad_sim.experiments import staleness_decision
from iaad_sim.fusion import PolicyConfig, PolicyMode, SorBuffer, dedup_detections, select_mode
from iaad_sim.network import LatencyTrace

from conftest import det

coords = st.floats(-200, 200, allow_nan=False)


@given(st.lists(st.integers(0, 10_000_000), min_size=1, max_size=60))
def test_track_stays_ordered_and_bounded(times):
    track = Track("a")
    for t in times:
        try:
            track.append(TrackState(t, Vec2(0, 0), Vec2(0, 0)))
        except StaleFrame:
            assert t <= track.last_time
    ts = [s.t for s in track]
    assert ts == sorted(set(ts)) and len(ts) <= 25


detections = st.builds(
    det,
    st.one_of(st.none(), st.sampled_from("ABCDE")),
    coords, coords,
    source=st.sampled_from([Source.SOV, Source.SOR]),
)


@given(st.lists(detections, max_size=12), st.floats(0.1, 5.0))
def test_dedup_invariants(dets, gate):
    out = dedup_detections(dets, gate)
    assert len(out) <= len(dets)
    ids = [d.object_id for d in out if d.object_id is not None]
    assert len(ids) == len(set(ids))
    assert {d.object_id for d in dets if d.object_id} == set(ids)
    # every input is represented by an output at the same id or within the gate
    for d in dets:
        assert any((d.object_id is not None and o.object_id == d.object_id) or o.position.dist(d.position) <= gate
                   for o in out)
    assert dedup_detections(out, gate) == out


@given(st.integers(0, 4_999_999))
def test_staleness_threshold_is_sharp(tolerance):
    cfg = PolicyConfig(mode=PolicyMode.INTER_ENABLED, inter_tolerance=tolerance)
    assert staleness_decision(tolerance, cfg) is FusionMode.INTER
    assert staleness_decision(tolerance + 1, cfg) is FusionMode.NO_FUSION


@given(st.booleans(), st.sampled_from(list(PolicyMode)),
       st.one_of(st.none(), st.integers(0, 20_000_000)), st.one_of(st.none(), st.integers(0, 20_000_000)))
def test_ladder_is_total(arrived, mode, post_age, heavy_age):
    now = 20_000_000
    buf = SorBuffer()
    if post_age is not None:
        buf.offer_post(PerceptionFrame(0, now - post_age, Source.SOR), now - post_age)
    if heavy_age is not None:
        buf.offer_heavy(0, now - heavy_age, (), now - heavy_age)
    assert isinstance(select_mode(arrived, buf, now, PolicyConfig(mode=mode)), FusionMode)


@settings(max_examples=50)
@given(st.lists(st.one_of(st.none(), st.integers(1, 10**7)), max_size=40))
def test_trace_csv_round_trip(outcomes):
    trace = LatencyTrace()
    for k, lat in enumerate(outcomes):
        trace.append(k, lat)
    back = LatencyTrace.from_csv(trace.to_csv())
    assert back.entries == trace.entries
