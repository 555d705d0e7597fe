"""Session persistence: the JSON log a therapist reviews.

One file per session. Field names and layout:

{
  "exercise": "seated",
  "start_time": "2025-01-15T10:30:45.000Z",
  "end_time":   "2025-01-15T10:36:12.500Z",
  "reps": [{"rep_id": 1, "angle": 42.8, "hold_duration": 2.5,
            "correct": true, "excellent": true, "side": "Right"}],
  "total_score": 50,
  "streaks": 3,
  "events": [{"t": 12.4, "kind": "PostureFault", "detail": "NotSeated"}],
  "config_snapshot": {...exercise thresholds...}
}

"streaks" records the best streak of the session. Event timestamps are
seconds from the start of the pose stream, so a replayed session
serializes identically regardless of replay speed. Angles are written
with one decimal place.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone

from .fsm import LEFT, RIGHT, RepRecord

EVENT_POSTURE_FAULT = "PostureFault"
EVENT_OVER_ROTATION = "OverRotation"
EVENT_PERFECT_STREAK = "PerfectStreak"
EVENT_ACHIEVEMENT = "Achievement"
EVENT_WRONG_SIDE = "WrongSide"

_EVENT_KINDS = {
    EVENT_POSTURE_FAULT,
    EVENT_OVER_ROTATION,
    EVENT_PERFECT_STREAK,
    EVENT_ACHIEVEMENT,
    EVENT_WRONG_SIDE,
}


class SessionLogError(ValueError):
    pass


@dataclass(frozen=True)
class SessionEvent:
    t: float  # seconds from stream start
    kind: str
    detail: str = ""


@dataclass
class SessionLog:
    exercise: str
    start_time: datetime
    end_time: datetime
    reps: list[RepRecord] = field(default_factory=list)
    total_score: int = 0
    streaks: int = 0  # best streak
    events: list[SessionEvent] = field(default_factory=list)
    config_snapshot: dict = field(default_factory=dict)


def session_accuracy(log: SessionLog) -> float | None:
    """Percentage of correct reps; None when the session has no reps, so
    an empty session is never confused with an all-wrong one."""
    if not log.reps:
        return None
    correct = sum(1 for r in log.reps if r.correct)
    return 100.0 * correct / len(log.reps)


def _check_invariants(log: SessionLog) -> None:
    if log.end_time < log.start_time:
        raise SessionLogError("end_time precedes start_time")
    for i, rep in enumerate(log.reps, 1):
        if rep.rep_id != i:
            raise SessionLogError(f"rep_id sequence broken at index {i}: {rep.rep_id}")
        if rep.excellent and not rep.correct:
            raise SessionLogError(f"rep {i} marked excellent but not correct")
        if rep.side not in (RIGHT, LEFT):
            raise SessionLogError(f"rep {i} has invalid side {rep.side!r}")
        if not math.isfinite(rep.angle_deg) or not math.isfinite(rep.hold_duration_s):
            raise SessionLogError(f"rep {i} has non-finite numbers")
    for ev in log.events:
        if ev.kind not in _EVENT_KINDS:
            raise SessionLogError(f"unknown event kind {ev.kind!r}")
        if ev.t < 0:
            raise SessionLogError("event timestamp negative")
    correct = sum(1 for r in log.reps if r.correct)
    excellent = sum(1 for r in log.reps if r.excellent)
    faults = sum(1 for e in log.events if e.kind == EVENT_POSTURE_FAULT)
    expected = 10 * correct + 5 * excellent - 5 * faults
    if log.total_score != expected:
        raise SessionLogError(
            f"total_score {log.total_score} breaks the scoring identity "
            f"(10*{correct} + 5*{excellent} - 5*{faults} = {expected})"
        )


def _fmt_time(dt: datetime) -> str:
    # ISO-8601, UTC, millisecond precision, Z suffix
    dt = dt.astimezone(timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%S.") + f"{dt.microsecond // 1000:03d}Z"


def _parse_time(s: str) -> datetime:
    try:
        return datetime.strptime(s, "%Y-%m-%dT%H:%M:%S.%fZ").replace(tzinfo=timezone.utc)
    except ValueError:
        # tolerate the short form without fractional seconds
        return datetime.strptime(s, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)


def to_json_dict(log: SessionLog) -> dict:
    return {
        "exercise": log.exercise,
        "start_time": _fmt_time(log.start_time),
        "end_time": _fmt_time(log.end_time),
        "reps": [
            {
                "rep_id": r.rep_id,
                "angle": round(r.angle_deg, 1),
                "hold_duration": r.hold_duration_s,
                "correct": r.correct,
                "excellent": r.excellent,
                "side": r.side,
            }
            for r in log.reps
        ],
        "total_score": log.total_score,
        "streaks": log.streaks,
        "events": [{"t": e.t, "kind": e.kind, "detail": e.detail} for e in log.events],
        "config_snapshot": dict(log.config_snapshot),
    }


def from_json_dict(data: dict) -> SessionLog:
    try:
        reps = [
            RepRecord(
                rep_id=int(r["rep_id"]),
                angle_deg=float(r["angle"]),
                hold_duration_s=float(r["hold_duration"]),
                correct=bool(r["correct"]),
                excellent=bool(r["excellent"]),
                side=str(r["side"]),
            )
            for r in data["reps"]
        ]
        log = SessionLog(
            exercise=str(data["exercise"]),
            start_time=_parse_time(data["start_time"]),
            end_time=_parse_time(data["end_time"]),
            reps=reps,
            total_score=int(data["total_score"]),
            streaks=int(data["streaks"]),
            events=[
                SessionEvent(t=float(e["t"]), kind=str(e["kind"]), detail=str(e.get("detail", "")))
                for e in data.get("events", [])
            ],
            config_snapshot=dict(data.get("config_snapshot", {})),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SessionLogError(f"malformed session log: {exc}") from exc
    return log


def write_session(log: SessionLog, path: str) -> None:
    """Validate and atomically write a session log.

    Refuses to write a log that breaks its own invariants; a crash
    mid-write never leaves a truncated file at the target path.
    """
    _check_invariants(log)
    payload = json.dumps(to_json_dict(log), indent=2, ensure_ascii=False) + "\n"
    directory = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(directory, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(payload)
            os.replace(tmp, path)
        except BaseException:
            try:
                os.unlink(tmp)
            except OSError:
                pass
            raise
    except OSError as exc:
        raise OSError(f"cannot write session log {path}: {exc}") from exc


def read_session(path: str) -> SessionLog:
    """Read and validate a session log; corrupt files are rejected."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise OSError(f"cannot read session log {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SessionLogError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise SessionLogError(f"{path}: session log root must be an object")
    log = from_json_dict(data)
    try:
        _check_invariants(log)
    except SessionLogError as exc:
        raise SessionLogError(f"{path}: {exc}") from exc
    return log


def session_filename(log: SessionLog) -> str:
    """{exercise}-{compact start time}.json"""
    t = log.start_time.astimezone(timezone.utc)
    stamp = t.strftime("%Y%m%dT%H%M%S") + f"{t.microsecond // 1000:03d}Z"
    return f"{log.exercise}-{stamp}.json"
