"""JSON run configuration: parsing, defaults and validation.

All times are integer microseconds except link-model latencies, which are in
milliseconds like :class:`~iaad_sim.network.LinkModel`.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .engine import BoundaryConfig, StageLatencies
from .errors import ConfigError, InvalidConfig, ParseError, ValidationError
from .fusion import PolicyConfig, PolicyMode
from .network import FIELD_MODEL, PERFECT_MODEL, STREAMS, LatencyTrace, LinkModel, TraceLink
from .scenario import Scenario, build_scenario, episode_from_dict

SEED_ENV = "IAAD_SIM_SEED"
LINK_PRESETS = {"field": FIELD_MODEL, "perfect": PERFECT_MODEL}
TOP_KEYS = {"scenario", "link", "stages", "boundaries", "policy", "seed", "sweep", "metrics"}
SWEEP_PARAMS = {"seed", "link", "stages", "boundaries", "policy"}


@dataclass(frozen=True)
class MetricsOptions:
    lookahead_us: int = 500_000
    lookahead_frames: tuple[int, ...] = ()


@dataclass(frozen=True)
class Sweep:
    """Either ``seeds`` consecutive seeds starting at the config seed, or one
    dotted parameter (e.g. ``policy.inter_tolerance``) over ``values``."""

    seeds: int | None = None
    param: str | None = None
    values: tuple[Any, ...] = ()


@dataclass(frozen=True)
class RunConfig:
    scenario: Scenario
    scenario_spec: Any
    link: LinkModel | None = FIELD_MODEL
    link_trace: Mapping[str, str] | None = None  # stream -> CSV path
    stages: StageLatencies = StageLatencies()
    boundaries: BoundaryConfig = BoundaryConfig()
    policy: PolicyConfig = PolicyConfig()
    seed: int = 0
    sweep: Sweep | None = None
    metrics: MetricsOptions = MetricsOptions()
    raw: Mapping[str, Any] = field(default_factory=dict, compare=False)

    def make_link(self) -> LinkModel | TraceLink:
        if self.link_trace is not None:
            return TraceLink({s: LatencyTrace.read(p) for s, p in self.link_trace.items()})
        return self.link


def _check_type(annotation: Any, value: Any, path: str) -> None:
    # Annotations are strings under postponed evaluation.
    ann = str(annotation)
    if ann == "bool":
        ok = isinstance(value, bool)
    elif "float" in ann:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif ann in ("int", "Micros"):
        ok = isinstance(value, int) and not isinstance(value, bool)
    else:
        return
    if not ok:
        raise ValidationError(path, f"expected {ann if ann != 'Micros' else 'an integer (microseconds)'}")


def _dataclass_from(cls: type, data: Any, path: str, base: Any = None) -> Any:
    if not isinstance(data, Mapping):
        raise ValidationError(path, "expected an object")
    names = {f.name: f for f in dataclasses.fields(cls)}
    for k in data:
        if k not in names:
            raise ValidationError(f"{path}.{k}", "unknown key")
    for k, v in data.items():
        _check_type(names[k].type, v, f"{path}.{k}")
    kw = dict(data)
    try:
        return dataclasses.replace(base, **kw) if base is not None else cls(**kw)
    except InvalidConfig as exc:
        raise ValidationError(exc.path if exc.path.startswith(path) else f"{path}.{exc.path.split('.')[-1]}",
                              str(exc).split(": ", 1)[-1]) from None
    except (ConfigError, ValueError, TypeError) as exc:
        raise ValidationError(path, str(exc)) from None


def _link(data: Any) -> tuple[LinkModel | None, dict[str, str] | None]:
    if data is None:
        return FIELD_MODEL, None
    if not isinstance(data, Mapping):
        raise ValidationError("link", "expected an object")
    for k in data:
        if k not in ("model", "trace"):
            raise ValidationError(f"link.{k}", "unknown key")
    if ("model" in data) == ("trace" in data):
        raise ValidationError("link", "exactly one of link.model or link.trace is required")
    if "trace" in data:
        tr = data["trace"]
        if isinstance(tr, str):
            return None, {s: tr for s in STREAMS}
        if isinstance(tr, Mapping) and set(tr) == set(STREAMS) and all(isinstance(v, str) for v in tr.values()):
            return None, dict(tr)
        raise ValidationError("link.trace", f"expected a CSV path or an object with keys {list(STREAMS)}")
    model = data["model"]
    if isinstance(model, str):
        if model not in LINK_PRESETS:
            raise ValidationError("link.model", f"unknown link preset {model!r}; choose from {sorted(LINK_PRESETS)}")
        return LINK_PRESETS[model], None
    if not isinstance(model, Mapping):
        raise ValidationError("link.model", "expected a preset name or an object")
    model = dict(model)
    base = LINK_PRESETS.get(model.pop("preset", "field"))
    if base is None:
        raise ValidationError("link.model.preset", f"choose from {sorted(LINK_PRESETS)}")
    episodes = model.pop("episodes", None)
    link = _dataclass_from(LinkModel, model, "link.model", base)
    if episodes is not None:
        try:
            eps = tuple(episode_from_dict(e, f"link.model.episodes[{i}]") for i, e in enumerate(episodes))
            link = dataclasses.replace(link, episodes=eps)
        except InvalidConfig as exc:
            raise ValidationError(exc.path, str(exc).split(": ", 1)[-1]) from None
    return link, None


def _policy(data: Any) -> PolicyConfig:
    if data is None:
        return PolicyConfig()
    if isinstance(data, Mapping) and "mode" in data:
        try:
            PolicyMode(data["mode"])
        except ValueError:
            raise ValidationError("policy.mode", f"expected one of {[m.value for m in PolicyMode]}") from None
    cfg = _dataclass_from(PolicyConfig, data, "policy")
    return cfg


def _seed(value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or not 0 <= value < 2**64:
        raise ValidationError("seed", "expected an integer in [0, 2**64)")
    return value


def _sweep(data: Any) -> Sweep | None:
    if data is None:
        return None
    if not isinstance(data, Mapping):
        raise ValidationError("sweep", "expected an object")
    if set(data) == {"seeds"}:
        n = data["seeds"]
        if isinstance(n, bool) or not isinstance(n, int) or n < 1:
            raise ValidationError("sweep.seeds", "expected a positive integer")
        return Sweep(seeds=n)
    if set(data) == {"param", "values"}:
        param, values = data["param"], data["values"]
        if not isinstance(param, str) or param.split(".")[0] not in SWEEP_PARAMS:
            raise ValidationError("sweep.param", f"expected a dotted path under {sorted(SWEEP_PARAMS)}")
        if not isinstance(values, list) or not values:
            raise ValidationError("sweep.values", "expected a non-empty list")
        return Sweep(param=param, values=tuple(values))
    raise ValidationError("sweep", "expected {seeds} or {param, values}")


def _metrics(data: Any) -> MetricsOptions:
    if data is None:
        return MetricsOptions()
    if not isinstance(data, Mapping):
        raise ValidationError("metrics", "expected an object")
    data = dict(data)
    frames = data.pop("lookahead_frames", [])
    if not isinstance(frames, list) or not all(isinstance(k, int) and k >= 1 for k in frames):
        raise ValidationError("metrics.lookahead_frames", "expected a list of positive integers")
    opts = _dataclass_from(MetricsOptions, data, "metrics")
    return dataclasses.replace(opts, lookahead_frames=tuple(frames))


def config_from_dict(data: Any, env: Mapping[str, str] | None = None) -> RunConfig:
    """Validate a parsed config tree and apply defaults.

    ``IAAD_SIM_SEED`` in ``env`` (default ``os.environ``) overrides the seed.
    """
    if not isinstance(data, Mapping):
        raise ValidationError("", "config must be a JSON object")
    for k in data:
        if k not in TOP_KEYS:
            raise ValidationError(k, "unknown key")
    if "scenario" not in data:
        raise ValidationError("scenario", "missing")
    try:
        scenario = build_scenario(data["scenario"])
    except InvalidConfig as exc:
        raise ValidationError(exc.path, str(exc).split(": ", 1)[-1]) from None
    link, trace = _link(data.get("link"))
    stages = _dataclass_from(StageLatencies, data.get("stages", {}), "stages")
    boundaries = _dataclass_from(BoundaryConfig, data.get("boundaries", {}), "boundaries")
    try:
        boundaries.validate(stages, scenario.frame_period)
    except ConfigError as exc:
        raise ValidationError("boundaries", str(exc)) from None
    seed = _seed(data.get("seed", 0))
    env = os.environ if env is None else env
    if env.get(SEED_ENV):
        try:
            seed = _seed(int(env[SEED_ENV]))
        except ValueError:
            raise ValidationError("seed", f"{SEED_ENV} is not an integer") from None
    return RunConfig(
        scenario=scenario,
        scenario_spec=data["scenario"],
        link=link,
        link_trace=trace,
        stages=stages,
        boundaries=boundaries,
        policy=_policy(data.get("policy")),
        seed=seed,
        sweep=_sweep(data.get("sweep")),
        metrics=_metrics(data.get("metrics")),
        raw=dict(data),
    )


def parse_config_text(text: str, env: Mapping[str, str] | None = None) -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{exc.msg} (column {exc.colno})", exc.lineno) from None
    return config_from_dict(data, env)


def parse_config(path: str | Path, env: Mapping[str, str] | None = None) -> RunConfig:
    return parse_config_text(Path(path).read_text(encoding="utf-8"), env)


def with_override(raw: Mapping[str, Any], dotted: str, value: Any) -> dict[str, Any]:
    """Copy of a raw config tree with one dotted key replaced."""
    out = json.loads(json.dumps(raw))
    node = out
    keys = dotted.split(".")
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ValidationError(dotted, "cannot override inside a non-object")
    node[keys[-1]] = value
    return out
