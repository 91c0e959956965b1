import csv
import io
import json

import pytest

from iaad_sim.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, main
from iaad_sim.config import SEED_ENV, config_from_dict, parse_config, parse_config_text
from iaad_sim.engine import BoundaryConfig, StageLatencies
from iaad_sim.errors import ParseError, ValidationError
from iaad_sim.fusion import PolicyConfig, PolicyMode
from iaad_sim.network import FIELD_MODEL, PERFECT_MODEL


def write(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data) if not isinstance(data, str) else data, encoding="utf-8")
    return p


def test_minimal_config_defaults():
    cfg = config_from_dict({"scenario": "arc"}, env={})
    assert cfg.link == FIELD_MODEL and cfg.link_trace is None
    assert cfg.stages == StageLatencies() and cfg.boundaries == BoundaryConfig()
    assert cfg.policy == PolicyConfig() and cfg.policy.mode is PolicyMode.ADAPTIVE
    assert cfg.seed == 0 and cfg.sweep is None
    assert cfg.scenario.name == "arc"


def test_config_options():
    cfg = config_from_dict({
        "scenario": {"preset": "arc", "duration": 3.0},
        "link": {"model": {"preset": "field", "loss_prob": 0.1, "episodes": [{"start": 1.0, "duration": 0.5}]}},
        "policy": {"mode": "inter", "inter_tolerance": 400_000},
        "boundaries": {"wait_window": 20_000},
        "seed": 9,
        "sweep": {"param": "policy.mode", "values": ["intra", "adaptive"]},
        "metrics": {"lookahead_frames": [5, 50]},
    }, env={})
    assert cfg.scenario.duration == 3.0
    assert cfg.link.loss_prob == 0.1 and cfg.link.episodes[0].start == 1_000_000
    assert cfg.policy.mode is PolicyMode.INTER_ENABLED and cfg.policy.inter_tolerance == 400_000
    assert cfg.boundaries.wait_window == 20_000 and cfg.seed == 9
    assert cfg.metrics.lookahead_frames == (5, 50)
    assert config_from_dict({"scenario": "arc", "link": {"model": "perfect"}}, env={}).link == PERFECT_MODEL


@pytest.mark.parametrize("data,path", [
    ({}, "scenario"),
    ({"scenario": "nope"}, "scenario.preset"),
    ({"scenario": "arc", "extra": 1}, "extra"),
    ({"scenario": "arc", "seed": -1}, "seed"),
    ({"scenario": "arc", "seed": 1.5}, "seed"),
    ({"scenario": "arc", "stages": {"sov_planning": 1.5}}, "stages.sov_planning"),
    ({"scenario": "arc", "stages": {"sov_planing": 10}}, "stages.sov_planing"),
    ({"scenario": "arc", "policy": {"mode": "fastest"}}, "policy.mode"),
    ({"scenario": "arc", "link": {"model": "field", "trace": "x.csv"}}, "link"),
    ({"scenario": "arc", "link": {"model": {"spike_prob": 2}}}, "link.model"),
    ({"scenario": "arc", "boundaries": {"wait_window": 90_000}}, "boundaries"),
    ({"scenario": "arc", "sweep": {"param": "scenario.duration", "values": [1]}}, "sweep.param"),
])
def test_validation_errors_name_the_key(data, path):
    with pytest.raises(ValidationError) as exc:
        config_from_dict(data, env={})
    assert exc.value.path.startswith(path)


def test_parse_error_reports_line():
    with pytest.raises(ParseError) as exc:
        parse_config_text('{\n  "scenario": "arc",\n  "seed": ,\n}', env={})
    assert exc.value.line == 3


def test_env_seed_override(tmp_path):
    p = write(tmp_path, {"scenario": "arc", "seed": 1})
    assert parse_config(p, env={SEED_ENV: "42"}).seed == 42
    assert parse_config(p, env={}).seed == 1
    with pytest.raises(ValidationError):
        parse_config(p, env={SEED_ENV: "abc"})


def test_run_writes_artifacts_deterministically(tmp_path, capsys):
    cfg = write(tmp_path, {"scenario": {"preset": "handover", "duration": 3.0}, "seed": 2})
    for out in ("a", "b"):
        assert main(["run", "-c", str(cfg), "-o", str(tmp_path / out)]) == EXIT_OK
    names = ["log.json", "metrics.json", "fusion_events.csv", "de_series.csv",
             "trace_post_perception.csv", "trace_heavy.csv"]
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()
    assert "miss_ratio=" in capsys.readouterr().out
    events = list(csv.DictReader(io.StringIO((tmp_path / "a" / "fusion_events.csv").read_text())))
    assert len(events) == 30


def test_run_flags_and_trace_replay(tmp_path):
    cfg = write(tmp_path, {"scenario": {"preset": "arc", "duration": 3.0}, "seed": 5})
    assert main(["run", "-c", str(cfg), "-o", str(tmp_path / "a"), "--policy", "intra", "--seed", "8"]) == EXIT_OK
    m = json.loads((tmp_path / "a" / "metrics.json").read_text())
    assert m["policy"] == "intra" and m["seed"] == 8
    # replaying one recorded stream for both streams is allowed; replaying per stream reproduces exactly
    per_stream = write(tmp_path, {"scenario": {"preset": "arc", "duration": 3.0}, "seed": 8,
                                  "policy": {"mode": "intra"},
                                  "link": {"trace": {"post_perception": str(tmp_path / "a" / "trace_post_perception.csv"),
                                                     "heavy": str(tmp_path / "a" / "trace_heavy.csv")}}},
                       "replay.json")
    assert main(["run", "-c", str(per_stream), "-o", str(tmp_path / "r")]) == EXIT_OK
    assert (tmp_path / "a" / "log.json").read_bytes() == (tmp_path / "r" / "log.json").read_bytes()
    assert main(["run", "-c", str(cfg), "-o", str(tmp_path / "t"),
                 "--link-trace", str(tmp_path / "a" / "trace_post_perception.csv")]) == EXIT_OK


def test_sweep_csv(tmp_path):
    cfg = write(tmp_path, {"scenario": {"preset": "arc", "duration": 2.0}, "seed": 3, "sweep": {"seeds": 3}})
    assert main(["run", "-c", str(cfg), "-o", str(tmp_path / "s")]) == EXIT_OK
    rows = list(csv.DictReader(io.StringIO((tmp_path / "s" / "sweep.csv").read_text())))
    assert [r["seed"] for r in rows] == ["3", "4", "5"]
    cfg = write(tmp_path, {"scenario": {"preset": "arc", "duration": 2.0},
                           "sweep": {"param": "boundaries.wait_window", "values": [0, 35000]}}, "p.json")
    assert main(["run", "-c", str(cfg), "-o", str(tmp_path / "p")]) == EXIT_OK
    rows = list(csv.DictReader(io.StringIO((tmp_path / "p" / "sweep.csv").read_text())))
    assert float(rows[0]["miss_ratio"]) == 1.0 and float(rows[1]["miss_ratio"]) < 1.0


def test_exit_codes(tmp_path, capsys):
    bad = write(tmp_path, {"scenario": "arc", "policy": {"mode": "fastest"}})
    assert main(["run", "-c", str(bad), "-o", str(tmp_path / "x")]) == EXIT_CONFIG
    assert "policy.mode" in capsys.readouterr().err
    broken = write(tmp_path, "{", "broken.json")
    assert main(["run", "-c", str(broken), "-o", str(tmp_path / "x")]) == EXIT_CONFIG
    assert main(["run", "-c", str(tmp_path / "missing.json"), "-o", str(tmp_path / "x")]) == EXIT_IO
    ok = write(tmp_path, {"scenario": "arc"}, "ok.json")
    assert main(["table2", "-c", str(ok), "-o", str(tmp_path / "x")]) == EXIT_CONFIG


def test_table2_cli(tmp_path, capsys):
    cfg = write(tmp_path, {"scenario": "approach"})
    assert main(["table2", "-c", str(cfg), "-o", str(tmp_path / "t")]) == EXIT_OK
    rows = list(csv.DictReader(io.StringIO((tmp_path / "t" / "table2.csv").read_text())))
    assert [float(r["distance_no_sor_m"]) for r in rows] == [63, 56, 49, 42, 35]
    assert [float(r["distance_light_sor_m"]) for r in rows] == [163, 156, 149, 142, 135]
    assert [float(r["distance_heavy_sor_m"]) for r in rows] == [313, 306, 299, 292, 285]
    assert "frames" in capsys.readouterr().out


def test_compare_cli(tmp_path, capsys):
    base = {"scenario": {"preset": "complementary", "duration": 3.0}}
    cfg = write(tmp_path, base)
    for policy in ("intra", "planning"):
        assert main(["run", "-c", str(cfg), "-o", str(tmp_path / policy), "--policy", policy]) == EXIT_OK
    capsys.readouterr()
    assert main(["compare", str(tmp_path / "intra" / "metrics.json"),
                 str(tmp_path / "planning" / "metrics.json")]) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "metric,intra,planning,delta_planning"
    assert any(line.startswith("mean_displacement_error,") for line in out)
    other = write(tmp_path, {"scenario": {"preset": "arc", "duration": 3.0}}, "arc.json")
    assert main(["run", "-c", str(other), "-o", str(tmp_path / "arc")]) == EXIT_OK
    assert main(["compare", str(tmp_path / "intra" / "metrics.json"), str(tmp_path / "arc" / "metrics.json")]) == EXIT_CONFIG
