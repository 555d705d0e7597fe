"""Engine and exercise configuration.

Config files are JSON with the same key names as the dataclass fields,
nested as {"exercise": {...}, ...}. Unknown keys are rejected so typos
fail fast instead of silently running with defaults.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from typing import Any


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExerciseConfig:
    """Thresholds for the seated rotational stretch.

    Angles are degrees of torso rotation; sides alternate starting with
    the right when alternate_sides is set.
    """

    safe_min_deg: float = 20.0
    safe_max_deg: float = 60.0
    excel_min_deg: float = 40.0
    excel_max_deg: float = 50.0
    hold_required_s: float = 2.0
    neutral_band_deg: float = 10.0
    alternate_sides: bool = True

    def __post_init__(self):
        if not (0.0 < self.neutral_band_deg < self.safe_min_deg):
            raise ConfigError("neutral band must sit strictly inside the safe range")
        if not (self.safe_min_deg < self.excel_min_deg < self.excel_max_deg < self.safe_max_deg):
            raise ConfigError("excellence window must lie strictly within the safe range")
        if not (2.0 <= self.hold_required_s <= 3.0):
            raise ConfigError("hold_required_s must be within [2, 3] seconds")


@dataclass(frozen=True)
class EngineConfig:
    exercise: ExerciseConfig = field(default_factory=ExerciseConfig)
    exercise_name: str = "seated"
    listen_port: int = 9750
    feedback_host: str = "127.0.0.1"
    feedback_port: int = 9751
    bridge_port: int = 9752
    visibility_threshold: float = 0.9
    smoothing_alpha: float = 0.3
    dropout_limit_frames: int = 30
    max_gap_s: float = 0.5
    idle_timeout_s: float = 30.0
    seated_max_ratio: float = 0.55
    tilt_max_deg: float = 15.0
    sessions_dir: str = "sessions"
    prompts_file: str | None = None
    log_level: str = "info"

    def __post_init__(self):
        if self.log_level not in ("debug", "info", "warning", "error"):
            raise ConfigError(f"unknown log_level {self.log_level!r}")
        if not (0.0 < self.smoothing_alpha <= 1.0):
            raise ConfigError("smoothing_alpha must be in (0, 1]")
        if not (0.0 <= self.visibility_threshold < 1.0):
            raise ConfigError("visibility_threshold must be in [0, 1)")
        if self.dropout_limit_frames < 1:
            raise ConfigError("dropout_limit_frames must be at least 1")
        ports = (self.listen_port, self.feedback_port, self.bridge_port)
        if len(set(ports)) != len(ports):
            raise ConfigError(f"ports must be distinct, got {ports}")


def _build(cls, data: dict[str, Any]):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return cls(**data)


def load_config(path: str | None = None, overrides: dict[str, Any] | None = None) -> EngineConfig:
    """Build an EngineConfig from an optional JSON file plus overrides.

    Precedence, lowest to highest: dataclass defaults, file values,
    the TWISTCOACH_SESSIONS_DIR environment variable, overrides.
    """
    data: dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")

    env_dir = os.environ.get("TWISTCOACH_SESSIONS_DIR")
    if env_dir:
        data["sessions_dir"] = env_dir
    if overrides:
        data = {**data, **{k: v for k, v in overrides.items() if v is not None}}

    exercise_data = data.pop("exercise", {})
    if not isinstance(exercise_data, dict):
        raise ConfigError("exercise section must be an object")
    try:
        exercise = _build(ExerciseConfig, exercise_data)
        return _build(EngineConfig, {**data, "exercise": exercise})
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def config_snapshot(cfg: EngineConfig) -> dict[str, Any]:
    """The exercise parameters recorded into every session log."""
    ex = cfg.exercise
    return {
        "safe_min_deg": ex.safe_min_deg,
        "safe_max_deg": ex.safe_max_deg,
        "excel_min_deg": ex.excel_min_deg,
        "excel_max_deg": ex.excel_max_deg,
        "hold_required_s": ex.hold_required_s,
        "neutral_band_deg": ex.neutral_band_deg,
        "alternate_sides": ex.alternate_sides,
    }
