"""Per-frame processing core shared by the live service and offline replay.

One FrameEngine instance runs one session at a time: datagrams (or
decoded frames) go in, feedback packets and session bookkeeping come
out. All exercise timing derives from the timestamps inside the pose
packets, never from the wall clock, so replaying a recording at any
speed reproduces the same session byte for byte; the wall clock only
stamps start_time, and end_time is start_time plus the stream duration.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

import numpy as np

from . import kernels, kinematics, protocol
from .config import EngineConfig, config_snapshot
from .fsm import EventKind, ExerciseFsm, ExerciseState, FsmEvent, Phase, RepRecord
from .landmarks import PoseFrame
from .pipeline import PoseSmoother
from .scoring import AudioCue, FeedbackEvent, FeedbackKind, PromptCode, ScoreKeeper
from .session import (
    EVENT_ACHIEVEMENT,
    EVENT_OVER_ROTATION,
    EVENT_PERFECT_STREAK,
    EVENT_POSTURE_FAULT,
    SessionEvent,
    SessionLog,
)

NOMINAL_DT_S = 1.0 / 30.0

# fixed session start for offline replays so repeated runs of the same
# recording produce byte-identical logs; overridden by recording metadata
REPLAY_EPOCH = datetime(2025, 1, 1, 0, 0, 0, tzinfo=timezone.utc)

# how urgently each cue wants the speaker when several fire in one frame
_CUE_PRIORITY = {
    AudioCue.FANFARE: 5,
    AudioCue.REWARD_COIN: 4,
    AudioCue.POSITIVE_CHIME: 3,
    AudioCue.COMPLETION_BEEP: 2,
    AudioCue.GUIDING_TONE: 1,
    AudioCue.NONE: 0,
}

_LOG_KIND = {
    FeedbackKind.POSTURE_FAULT_PENALTY: EVENT_POSTURE_FAULT,
    FeedbackKind.OVER_ROTATION_WARNING: EVENT_OVER_ROTATION,
    FeedbackKind.PERFECT_STREAK: EVENT_PERFECT_STREAK,
    FeedbackKind.ACHIEVEMENT: EVENT_ACHIEVEMENT,
}


class LatencyStats:
    """Rolling per-stage processing times plus drop counters."""

    STAGES = ("decode", "condition", "kinematics", "fsm_score", "encode", "total")

    def __init__(self, window: int = 100_000):
        self._samples = {stage: deque(maxlen=window) for stage in self.STAGES}
        self.frames_processed = 0
        self.frames_dropped_stale = 0
        self.frames_malformed = 0

    def record(self, stage: str, elapsed_ns: int) -> None:
        self._samples[stage].append(elapsed_ns / 1000.0)  # store microseconds

    def percentiles(self, stage: str) -> dict[str, float]:
        samples = self._samples[stage]
        if not samples:
            return {"p50": 0.0, "p95": 0.0, "p99": 0.0}
        arr = np.fromiter(samples, dtype=np.float64)
        p50, p95, p99 = np.percentile(arr, [50, 95, 99])
        return {"p50": float(p50), "p95": float(p95), "p99": float(p99)}

    def summary(self) -> dict:
        return {
            "frames_processed": self.frames_processed,
            "frames_dropped_stale": self.frames_dropped_stale,
            "frames_malformed": self.frames_malformed,
            "stages_us": {stage: self.percentiles(stage) for stage in self.STAGES},
        }


@dataclass
class ProcessResult:
    feedback: protocol.FeedbackState
    feedback_bytes: bytes
    events: list[FeedbackEvent] = field(default_factory=list)
    state: ExerciseState | None = None
    condition_status: int = kernels.STATUS_OK


class FrameEngine:
    def __init__(self, config: EngineConfig | None = None, prompts=None, warm: bool = True):
        self.cfg = config or EngineConfig()
        self.scores = ScoreKeeper(prompts)
        self.stats = LatencyStats()
        if warm:
            kernels.warmup()
        self._reset_stream()
        self.session_active = False
        self.start_time: datetime | None = None

    def _reset_stream(self) -> None:
        cfg = self.cfg
        self.smoother = PoseSmoother(
            alpha=cfg.smoothing_alpha,
            visibility_threshold=cfg.visibility_threshold,
            dropout_limit=cfg.dropout_limit_frames,
        )
        self.fsm = ExerciseFsm(cfg.exercise)
        self._last_seq: int | None = None
        self._first_ts: int | None = None
        self._last_ts: int | None = None
        self._last_fsm_ts: int | None = None
        self._last_prompt = PromptCode.NONE
        self._reps: list[RepRecord] = []
        self._events: list[SessionEvent] = []

    # -- session lifecycle ------------------------------------------------

    def start_session(self, start_time: datetime | None = None) -> None:
        """Open a fresh session; processing auto-opens one if needed."""
        self._reset_stream()
        self.scores = ScoreKeeper(self.scores.prompts)
        self.start_time = start_time or datetime.now(timezone.utc)
        self.session_active = True

    def end_session(self) -> SessionLog | None:
        """Close the session and hand back the log (None if none open)."""
        if not self.session_active or self.start_time is None:
            return None
        log = SessionLog(
            exercise=self.cfg.exercise_name,
            start_time=self.start_time,
            end_time=self.start_time + timedelta(seconds=self.stream_elapsed_s),
            reps=list(self._reps),
            total_score=self.scores.state.total_score,
            streaks=self.scores.state.best_streak,
            events=list(self._events),
            config_snapshot=config_snapshot(self.cfg),
        )
        self.session_active = False
        return log

    @property
    def stream_elapsed_s(self) -> float:
        if self._first_ts is None or self._last_ts is None:
            return 0.0
        return (self._last_ts - self._first_ts) / 1e6

    # -- frame path --------------------------------------------------------

    def process_datagram(self, data: bytes, strict: bool = False) -> ProcessResult | None:
        """Full path from raw bytes; returns None for stale or (in
        non-strict mode) malformed datagrams."""
        t0 = time.perf_counter_ns()
        try:
            frame = protocol.decode_pose(data)
        except protocol.ProtocolError:
            self.stats.frames_malformed += 1
            if strict:
                raise
            return None
        decode_ns = time.perf_counter_ns() - t0
        if not protocol.accept_frame(self._last_seq, frame.seq):
            self.stats.frames_dropped_stale += 1
            return None
        return self.process_frame(frame, _decode_ns=decode_ns, _t0=t0)

    def process_frame(self, frame: PoseFrame, _decode_ns: int = 0, _t0: int | None = None) -> ProcessResult:
        t0 = _t0 if _t0 is not None else time.perf_counter_ns()
        if not self.session_active:
            self.start_session()
        cfg = self.cfg
        self._last_seq = frame.seq
        if self._first_ts is None:
            self._first_ts = frame.timestamp_us
        dt_stream = 0.0 if self._last_ts is None else (frame.timestamp_us - self._last_ts) / 1e6
        self._last_ts = frame.timestamp_us
        t_stream = (frame.timestamp_us - self._first_ts) / 1e6

        t1 = time.perf_counter_ns()
        cond = self.smoother.update(frame)
        t2 = time.perf_counter_ns()

        rot, tilt, ratio, degen = kernels.torso_metrics_batch(cond.xyz[np.newaxis])
        have_metrics = degen[0] == 0
        if have_metrics:
            metrics = kinematics.TorsoMetrics(float(rot[0]), float(tilt[0]), float(ratio[0]))
            posture = kinematics.classify_posture(
                metrics, cfg.seated_max_ratio, cfg.tilt_max_deg
            )
        else:
            metrics = None
            posture = kinematics.POSTURE_OK
        t3 = time.perf_counter_ns()

        fsm_events: list[FsmEvent] = []
        if cond.trackable and metrics is not None:
            dt = NOMINAL_DT_S if self._last_fsm_ts is None else (
                (frame.timestamp_us - self._last_fsm_ts) / 1e6
            )
            self._last_fsm_ts = frame.timestamp_us
            if dt > cfg.max_gap_s:
                # unseen motion across the gap: never integrate over it
                fsm_events.extend(self.fsm.pause())
                dt = NOMINAL_DT_S
            if dt <= 0.0:
                dt = NOMINAL_DT_S
            fsm_events.extend(self.fsm.step(metrics.rotation_deg, posture, dt))
        elif cond.status == kernels.STATUS_EXHAUSTED:
            fsm_events.extend(self.fsm.pause())

        fb_events: list[FeedbackEvent] = []
        if dt_stream > 0:
            fb_events.extend(self.scores.advance(dt_stream))
        for ev in fsm_events:
            if ev.kind == EventKind.REP_COMPLETE and ev.rep is not None:
                self._reps.append(ev.rep)
            fb_events.extend(self.scores.on_fsm_event(ev))
        for fev in fb_events:
            kind = _LOG_KIND.get(fev.kind)
            if kind is not None:
                self._events.append(SessionEvent(t=t_stream, kind=kind, detail=fev.detail))
        t4 = time.perf_counter_ns()

        state = self.fsm.snapshot()
        feedback = self._build_feedback(frame, cond.status, state, fb_events)
        fb_bytes = protocol.encode_feedback(feedback)
        t5 = time.perf_counter_ns()

        stats = self.stats
        stats.frames_processed += 1
        stats.record("decode", _decode_ns)
        stats.record("condition", t2 - t1)
        stats.record("kinematics", t3 - t2)
        stats.record("fsm_score", t4 - t3)
        stats.record("encode", t5 - t4)
        stats.record("total", _decode_ns + (t5 - t1))

        return ProcessResult(
            feedback=feedback,
            feedback_bytes=fb_bytes,
            events=fb_events,
            state=state,
            condition_status=cond.status,
        )

    def _build_feedback(
        self,
        frame: PoseFrame,
        status: int,
        state: ExerciseState,
        fb_events: list[FeedbackEvent],
    ) -> protocol.FeedbackState:
        flags = 0
        if not state.posture.is_seated:
            flags |= protocol.FLAG_NOT_SEATED
        if not state.posture.is_aligned:
            flags |= protocol.FLAG_MISALIGNED
        if state.phase == Phase.OVER_ROTATED:
            flags |= protocol.FLAG_OVER_ROTATED
        if status != kernels.STATUS_OK:
            flags |= protocol.FLAG_DROPOUT

        prompt_code, _text, prompt_cue = self.scores.prompt_for(state, self.cfg.exercise)
        cue = AudioCue.NONE
        best = 0
        for fev in fb_events:
            pri = _CUE_PRIORITY.get(fev.audio_cue, 0)
            if pri > best:
                best = pri
                cue = fev.audio_cue
        if cue == AudioCue.NONE and prompt_code != self._last_prompt:
            cue = prompt_cue
        self._last_prompt = prompt_code

        return protocol.FeedbackState(
            seq=frame.seq,
            timestamp_us=frame.timestamp_us,
            phase=int(state.phase),
            angle_deg=state.current_angle_deg,
            hold_progress=state.hold_progress,
            total_score=self.scores.state.total_score,
            current_streak=self.scores.state.current_streak,
            rep_count=state.rep_count,
            posture_flags=flags,
            prompt_code=int(prompt_code),
            audio_cue=int(cue),
        )


def replay_records(
    records,
    config: EngineConfig | None = None,
    start_time: datetime | None = None,
    speed: float = 1.0,
    sleep_fn=None,
) -> tuple[SessionLog, list[ProcessResult], "FrameEngine"]:
    """Drive a full session from recorded (delta_us, packet) pairs.

    Exercise timing always comes from the packet timestamps, so speed
    only changes how long the replay takes on the wall clock; the
    resulting log is identical at any speed. sleep_fn defaults to
    time.sleep and is only consulted when a delay is due.
    """
    from .recording import replay_deltas

    engine = FrameEngine(config)
    engine.start_session(start_time or REPLAY_EPOCH)
    sleeper = sleep_fn or time.sleep
    results: list[ProcessResult] = []
    for sleep_s, packet in replay_deltas(records, speed):
        if sleep_s > 0:
            sleeper(sleep_s)
        result = engine.process_datagram(packet, strict=True)
        if result is not None:
            results.append(result)
    session = engine.end_session()
    assert session is not None
    return session, results, engine
