"""Deterministic discrete-event simulator of vehicle/roadside data fusion under
V2X latency, jitter and loss."""

from .core import (
    Detection,
    FusionMode,
    PerceptionFrame,
    PlanningDecision,
    PredictedTrajectory,
    Source,
    Track,
    TrackState,
    Vec2,
    timestamp_of_tick,
)
from .engine import BoundaryConfig, Simulation, SimulationLog, StageLatencies, check_boundaries, prepare_sor, run
from .fusion import (
    PolicyConfig,
    PolicyMode,
    SorBuffer,
    dedup_detections,
    inter_frame_fuse,
    intra_frame_fuse,
    planning_fuse,
    select_mode,
)
from .metrics import MetricsReport, compare, summarize
from .network import (
    FIELD_MODEL,
    PERFECT_MODEL,
    Episode,
    LatencyTrace,
    LinkModel,
    SyntheticLink,
    TraceLink,
    analytic_miss_ratio,
    replay_from_trace,
    sample_outcome,
)
from .prediction import Tracker, displacement_error, heavy_predict, light_predict, update_tracks
from .scenario import PRESETS, Scenario, build_scenario, sense, true_state

__version__ = "0.1.0"
