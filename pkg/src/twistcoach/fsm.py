"""Exercise state machine for the seated rotational stretch.

Drives phase tracking, hold-progress accumulation, rep detection and
safe-range enforcement from a stream of (angle, posture, dt) samples.
The machine is deterministic: identical input sequences produce
identical event sequences and identical serialized state.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

from .config import ExerciseConfig
from .kinematics import PostureStatus

MAX_STEP_DT_S = 0.5
FAULT_CLEAR_S = 1.0  # fault episode ends after this long without a fault


class Phase(enum.IntEnum):
    # values are the wire encoding, do not renumber
    NEUTRAL = 0
    ROTATING_RIGHT = 1
    HOLDING_RIGHT = 2
    ROTATING_LEFT = 3
    HOLDING_LEFT = 4
    RETURNING_TO_NEUTRAL = 5
    PAUSED = 6
    OVER_ROTATED = 7


RIGHT = "Right"
LEFT = "Left"

_HOLDING = {RIGHT: Phase.HOLDING_RIGHT, LEFT: Phase.HOLDING_LEFT}
_ROTATING = {RIGHT: Phase.ROTATING_RIGHT, LEFT: Phase.ROTATING_LEFT}


def other_side(side: str) -> str:
    return LEFT if side == RIGHT else RIGHT


def hold_progress(elapsed_s: float, required_s: float) -> float:
    """Normalized hold progress, clamped to [0, 1]."""
    if required_s <= 0:
        raise ValueError("required_s must be positive")
    if elapsed_s < 0:
        raise ValueError("elapsed_s must be non-negative")
    return min(elapsed_s / required_s, 1.0)


class EventKind(enum.Enum):
    HOLD_COMPLETE = "HoldComplete"
    REP_COMPLETE = "RepComplete"
    OVER_ROTATION = "OverRotation"
    POSTURE_FAULT = "PostureFault"
    WRONG_SIDE = "WrongSide"
    PAUSED = "Paused"


@dataclass(frozen=True)
class RepRecord:
    rep_id: int
    angle_deg: float  # peak |rotation| during the counted hold
    hold_duration_s: float
    correct: bool
    excellent: bool
    side: str


@dataclass(frozen=True)
class FsmEvent:
    kind: EventKind
    angle_deg: float = 0.0
    reason: str | None = None
    side: str | None = None
    rep: Optional[RepRecord] = None


@dataclass(frozen=True)
class ExerciseState:
    """Snapshot published with every processed frame.

    hold_progress and hold_elapsed_s read zero outside Holding phases;
    the underlying accumulation survives excursions through
    ReturningToNeutral/OverRotated and resets when the excursion ends.
    """

    phase: Phase
    current_angle_deg: float
    hold_progress: float
    hold_elapsed_s: float
    current_side: str
    rep_count: int
    posture: PostureStatus

    def as_dict(self) -> dict:
        return {
            "phase": self.phase.name,
            "current_angle_deg": self.current_angle_deg,
            "hold_progress": self.hold_progress,
            "hold_elapsed_s": self.hold_elapsed_s,
            "current_side": self.current_side,
            "rep_count": self.rep_count,
            "is_seated": self.posture.is_seated,
            "is_aligned": self.posture.is_aligned,
        }


@dataclass
class _Excursion:
    side: str
    hold_elapsed_s: float = 0.0
    hold_completed: bool = False
    peak_deg: float = 0.0
    over_rotated: bool = False
    fault_tainted: bool = False


class ExerciseFsm:
    """One instance per session; step() once per conditioned frame.

    Callers must keep dt within (0, MAX_STEP_DT_S]; longer gaps mean
    tracking was lost and must go through pause() so the machine never
    integrates hold time across unseen motion.
    """

    def __init__(self, cfg: ExerciseConfig | None = None):
        self.cfg = cfg or ExerciseConfig()
        self.phase = Phase.NEUTRAL
        self.expected_side = RIGHT
        self.rep_count = 0
        self._excursion: _Excursion | None = None
        self._fault_active = False
        self._fault_clear_s = 0.0
        self._wrong_side_active = False
        self._last_angle = 0.0
        self._last_posture = PostureStatus(True, True)

    # -- driving ---------------------------------------------------------

    def pause(self) -> list[FsmEvent]:
        """Tracking lost: drop the running excursion and stop judging."""
        if self.phase == Phase.PAUSED:
            return []
        self.phase = Phase.PAUSED
        self._excursion = None
        self._wrong_side_active = False
        return [FsmEvent(EventKind.PAUSED)]

    def step(self, angle_deg: float, posture: PostureStatus, dt: float) -> list[FsmEvent]:
        if not dt > 0.0:
            raise ValueError(f"dt must be positive, got {dt}")
        if dt > MAX_STEP_DT_S:
            raise ValueError(
                f"dt {dt:.3f}s exceeds {MAX_STEP_DT_S}s; route the gap through pause()"
            )
        cfg = self.cfg
        events: list[FsmEvent] = []
        self._last_angle = angle_deg
        self._last_posture = posture

        if self.phase == Phase.PAUSED:
            # fresh view of the exercise; excursion was dropped at pause
            self.phase = Phase.NEUTRAL

        fault_now = posture.fault_reason is not None
        if fault_now:
            self._fault_clear_s = 0.0
            if not self._fault_active:
                self._fault_active = True
                events.append(
                    FsmEvent(EventKind.POSTURE_FAULT, angle_deg=angle_deg, reason=posture.fault_reason)
                )
            if self._excursion is not None:
                self._excursion.fault_tainted = True
        elif self._fault_active:
            self._fault_clear_s += dt
            if self._fault_clear_s >= FAULT_CLEAR_S:
                self._fault_active = False
                self._fault_clear_s = 0.0

        if abs(angle_deg) > cfg.safe_max_deg:
            if self.phase != Phase.OVER_ROTATED:
                events.append(FsmEvent(EventKind.OVER_ROTATION, angle_deg=angle_deg))
                if self._excursion is not None:
                    self._excursion.over_rotated = True
                elif self._sign_side(angle_deg) == self._armable_side(angle_deg):
                    # blew straight through the safe range before arming
                    exc = _Excursion(side=self._sign_side(angle_deg))
                    exc.over_rotated = True
                    exc.fault_tainted = fault_now
                    self._excursion = exc
                self.phase = Phase.OVER_ROTATED
            return events

        self._dispatch(angle_deg, fault_now, dt, events)
        return events

    # -- transition core -------------------------------------------------

    def _sign_side(self, angle_deg: float) -> str:
        return RIGHT if angle_deg >= 0 else LEFT

    def _armable_side(self, angle_deg: float) -> str | None:
        if self.cfg.alternate_sides:
            return self.expected_side
        return self._sign_side(angle_deg)

    @staticmethod
    def _signed(angle_deg: float, side: str) -> float:
        return angle_deg if side == RIGHT else -angle_deg

    def _dispatch(self, angle: float, fault_now: bool, dt: float, events: list[FsmEvent]) -> None:
        cfg = self.cfg
        band = cfg.neutral_band_deg
        smin = cfg.safe_min_deg

        # a step may chain through several transitions (for example
        # Holding -> Returning -> rep finalized -> Neutral when the angle
        # collapses within one frame); the loop settles in a few hops
        for _ in range(6):
            exc = self._excursion
            if self.phase == Phase.OVER_ROTATED:
                # back inside the safe range
                if exc is None:
                    self.phase = Phase.NEUTRAL
                    continue
                s = self._signed(angle, exc.side)
                if s >= smin:
                    self.phase = _HOLDING[exc.side]
                    continue
                if exc.hold_elapsed_s > 0.0:
                    self.phase = Phase.RETURNING_TO_NEUTRAL
                else:
                    self.phase = _ROTATING[exc.side]
                continue

            if self.phase == Phase.NEUTRAL:
                arm_side = self._armable_side(angle)
                s = self._signed(angle, arm_side) if arm_side else -1.0
                if arm_side is not None and s >= smin:
                    self._excursion = _Excursion(side=arm_side, fault_tainted=fault_now)
                    self._wrong_side_active = False
                    self.phase = _ROTATING[arm_side]
                    continue
                if cfg.alternate_sides:
                    wrong = self._signed(angle, other_side(self.expected_side))
                    if wrong >= band:
                        if not self._wrong_side_active:
                            self._wrong_side_active = True
                            events.append(
                                FsmEvent(
                                    EventKind.WRONG_SIDE,
                                    angle_deg=angle,
                                    side=self.expected_side,
                                )
                            )
                    else:
                        self._wrong_side_active = False
                return

            if self.phase in (Phase.ROTATING_RIGHT, Phase.ROTATING_LEFT):
                assert exc is not None
                s = self._signed(angle, exc.side)
                if s >= smin:
                    self.phase = _HOLDING[exc.side]
                    continue
                if s < band:
                    # gave up before reaching the work range
                    self._excursion = None
                    self.phase = Phase.NEUTRAL
                    continue
                return

            if self.phase in (Phase.HOLDING_RIGHT, Phase.HOLDING_LEFT):
                assert exc is not None
                s = self._signed(angle, exc.side)
                if s < smin:
                    self.phase = Phase.RETURNING_TO_NEUTRAL
                    continue
                if not fault_now:
                    exc.hold_elapsed_s += dt
                    if abs(angle) > exc.peak_deg:
                        exc.peak_deg = abs(angle)
                    if not exc.hold_completed and exc.hold_elapsed_s >= cfg.hold_required_s:
                        exc.hold_completed = True
                        events.append(
                            FsmEvent(
                                EventKind.HOLD_COMPLETE,
                                angle_deg=angle,
                                side=exc.side,
                            )
                        )
                return

            if self.phase == Phase.RETURNING_TO_NEUTRAL:
                assert exc is not None
                s = self._signed(angle, exc.side)
                if s >= smin:
                    self.phase = _HOLDING[exc.side]
                    continue
                flipped = self._signed(angle, other_side(exc.side)) >= band
                if abs(angle) < band or flipped:
                    self._finalize_excursion(events)
                    self.phase = Phase.NEUTRAL
                    continue
                return

            return
        raise AssertionError("transition chain did not settle")

    def _finalize_excursion(self, events: list[FsmEvent]) -> None:
        exc = self._excursion
        assert exc is not None
        if exc.hold_completed:
            self.rep_count += 1
            correct = not (exc.over_rotated or exc.fault_tainted)
            excellent = correct and (
                self.cfg.excel_min_deg <= exc.peak_deg <= self.cfg.excel_max_deg
            )
            rep = RepRecord(
                rep_id=self.rep_count,
                angle_deg=exc.peak_deg,
                hold_duration_s=exc.hold_elapsed_s,
                correct=correct,
                excellent=excellent,
                side=exc.side,
            )
            events.append(FsmEvent(EventKind.REP_COMPLETE, angle_deg=exc.peak_deg, side=exc.side, rep=rep))
            if self.cfg.alternate_sides:
                self.expected_side = other_side(exc.side)
        self._excursion = None

    # -- observation -----------------------------------------------------

    @property
    def fault_active(self) -> bool:
        return self._fault_active

    def snapshot(self) -> ExerciseState:
        exc = self._excursion
        holding = self.phase in (Phase.HOLDING_RIGHT, Phase.HOLDING_LEFT)
        elapsed = exc.hold_elapsed_s if (exc is not None and holding) else 0.0
        side = exc.side if exc is not None else self.expected_side
        return ExerciseState(
            phase=self.phase,
            current_angle_deg=self._last_angle,
            hold_progress=hold_progress(elapsed, self.cfg.hold_required_s),
            hold_elapsed_s=elapsed,
            current_side=side,
            rep_count=self.rep_count,
            posture=self._last_posture,
        )
