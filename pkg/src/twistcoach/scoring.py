"""Gamification layer: points, streaks, achievements, prompts, audio cues.

Score rules: +10 per correct rep, +5 excellence bonus when the hold
peaked inside the excellence band, -5 per posture-fault episode. The
total may go negative; clamping would hide fault counts from the
therapist. Streaks count consecutive correct reps and reset exactly on
posture faults; every fifth streak rep fires the PerfectStreak
celebration.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .config import ExerciseConfig
from .fsm import RIGHT, EventKind, ExerciseState, FsmEvent, Phase
from .kinematics import NOT_SEATED

REP_POINTS = 10
EXCELLENCE_BONUS = 5
FAULT_PENALTY = -5
PERFECT_STREAK_EVERY = 5
FIVE_MINUTE_S = 300.0

ACH_FIVE_MINUTE_WARRIOR = "FIVE_MINUTE_WARRIOR"
ACH_PERFECT_STREAK_5 = "PERFECT_STREAK_5"


class PromptCode(enum.IntEnum):
    # stable u16 wire codes, do not renumber
    NONE = 0
    ROTATE_MORE_RIGHT = 1
    ROTATE_MORE_LEFT = 2
    PERFECT_RIGHT = 3
    PERFECT_LEFT = 4
    EASE_BACK = 5
    GOOD_POSITION = 6
    RETURN_TO_CENTER = 7
    SIT_DOWN = 8
    SIT_UPRIGHT = 9
    TRACKING_LOST = 10


class AudioCue(enum.IntEnum):
    # stable u8 wire codes, do not renumber
    NONE = 0
    POSITIVE_CHIME = 1
    REWARD_COIN = 2
    GUIDING_TONE = 3
    COMPLETION_BEEP = 4
    FANFARE = 5


DEFAULT_PROMPTS: dict[PromptCode, str] = {
    PromptCode.NONE: "",
    PromptCode.ROTATE_MORE_RIGHT: "Rotate more to the right →",
    PromptCode.ROTATE_MORE_LEFT: "← Rotate more to the left",
    PromptCode.PERFECT_RIGHT: "Perfect RIGHT rotation!",
    PromptCode.PERFECT_LEFT: "Perfect LEFT rotation!",
    PromptCode.EASE_BACK: "Ease back, stay under 60°",
    PromptCode.GOOD_POSITION: "Good position; rotate more",
    PromptCode.RETURN_TO_CENTER: "Return to center",
    PromptCode.SIT_DOWN: "Please sit back down",
    PromptCode.SIT_UPRIGHT: "Sit upright, level your shoulders",
    PromptCode.TRACKING_LOST: "Tracking lost, hold still",
}


def load_prompt_table(path: str) -> dict[PromptCode, str]:
    """Load a prompt localization table.

    Plain UTF-8 lines of CODE=text, '#' comments allowed. Unknown codes
    are rejected; codes not mentioned keep their default text.
    """
    table = dict(DEFAULT_PROMPTS)
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected CODE=text")
            name, text = line.split("=", 1)
            try:
                code = PromptCode[name.strip()]
            except KeyError:
                raise ValueError(f"{path}:{lineno}: unknown prompt code {name.strip()!r}") from None
            table[code] = text
    return table


class FeedbackKind(enum.Enum):
    REP_SCORED = "RepScored"
    EXCELLENCE_BONUS = "ExcellenceBonus"
    POSTURE_FAULT_PENALTY = "PostureFaultPenalty"
    PERFECT_STREAK = "PerfectStreak"
    ACHIEVEMENT = "Achievement"
    PROMPT = "Prompt"
    OVER_ROTATION_WARNING = "OverRotationWarning"


@dataclass(frozen=True)
class FeedbackEvent:
    kind: FeedbackKind
    delta: int = 0
    prompt_code: PromptCode = PromptCode.NONE
    prompt_text: str = ""
    audio_cue: AudioCue = AudioCue.NONE
    achievement: str | None = None
    detail: str = ""


@dataclass
class ScoreState:
    total_score: int = 0
    current_streak: int = 0
    best_streak: int = 0
    achievements: set[str] = field(default_factory=set)
    session_elapsed_s: float = 0.0


class ScoreKeeper:
    """Folds FSM events into a running ScoreState, emitting UI events."""

    def __init__(self, prompts: dict[PromptCode, str] | None = None):
        self.state = ScoreState()
        self.prompts = prompts or DEFAULT_PROMPTS

    def _text(self, code: PromptCode) -> str:
        return self.prompts.get(code, DEFAULT_PROMPTS[code])

    def advance(self, dt: float) -> list[FeedbackEvent]:
        """Advance session time; emits time-based achievements."""
        st = self.state
        before = st.session_elapsed_s
        st.session_elapsed_s = before + dt
        out: list[FeedbackEvent] = []
        if (
            before < FIVE_MINUTE_S <= st.session_elapsed_s
            and ACH_FIVE_MINUTE_WARRIOR not in st.achievements
        ):
            st.achievements.add(ACH_FIVE_MINUTE_WARRIOR)
            out.append(
                FeedbackEvent(
                    kind=FeedbackKind.ACHIEVEMENT,
                    audio_cue=AudioCue.FANFARE,
                    achievement=ACH_FIVE_MINUTE_WARRIOR,
                    detail="5-Minute Warrior",
                )
            )
        return out

    def on_fsm_event(self, ev: FsmEvent) -> list[FeedbackEvent]:
        st = self.state
        out: list[FeedbackEvent] = []
        if ev.kind == EventKind.REP_COMPLETE:
            rep = ev.rep
            assert rep is not None
            if rep.correct:
                st.total_score += REP_POINTS
                st.current_streak += 1
                st.best_streak = max(st.best_streak, st.current_streak)
                out.append(
                    FeedbackEvent(
                        kind=FeedbackKind.REP_SCORED,
                        delta=REP_POINTS,
                        audio_cue=AudioCue.REWARD_COIN,
                        detail=f"rep {rep.rep_id} {rep.side}",
                    )
                )
                if rep.excellent:
                    st.total_score += EXCELLENCE_BONUS
                    out.append(
                        FeedbackEvent(
                            kind=FeedbackKind.EXCELLENCE_BONUS,
                            delta=EXCELLENCE_BONUS,
                            audio_cue=AudioCue.POSITIVE_CHIME,
                            detail=f"rep {rep.rep_id} peak {rep.angle_deg:.1f}",
                        )
                    )
                if st.current_streak % PERFECT_STREAK_EVERY == 0:
                    out.append(
                        FeedbackEvent(
                            kind=FeedbackKind.PERFECT_STREAK,
                            audio_cue=AudioCue.FANFARE,
                            detail=f"streak {st.current_streak}",
                        )
                    )
                    if ACH_PERFECT_STREAK_5 not in st.achievements:
                        st.achievements.add(ACH_PERFECT_STREAK_5)
                        out.append(
                            FeedbackEvent(
                                kind=FeedbackKind.ACHIEVEMENT,
                                audio_cue=AudioCue.FANFARE,
                                achievement=ACH_PERFECT_STREAK_5,
                                detail="Perfect Streak",
                            )
                        )
        elif ev.kind == EventKind.POSTURE_FAULT:
            st.total_score += FAULT_PENALTY
            st.current_streak = 0
            out.append(
                FeedbackEvent(
                    kind=FeedbackKind.POSTURE_FAULT_PENALTY,
                    delta=FAULT_PENALTY,
                    audio_cue=AudioCue.GUIDING_TONE,
                    detail=ev.reason or "",
                )
            )
        elif ev.kind == EventKind.OVER_ROTATION:
            out.append(
                FeedbackEvent(
                    kind=FeedbackKind.OVER_ROTATION_WARNING,
                    audio_cue=AudioCue.GUIDING_TONE,
                    detail=f"angle {ev.angle_deg:.1f}",
                )
            )
        elif ev.kind == EventKind.HOLD_COMPLETE:
            code = PromptCode.PERFECT_RIGHT if ev.side == RIGHT else PromptCode.PERFECT_LEFT
            out.append(
                FeedbackEvent(
                    kind=FeedbackKind.PROMPT,
                    prompt_code=code,
                    prompt_text=self._text(code),
                    audio_cue=AudioCue.COMPLETION_BEEP,
                )
            )
        elif ev.kind == EventKind.WRONG_SIDE:
            code = (
                PromptCode.ROTATE_MORE_RIGHT
                if ev.side == RIGHT
                else PromptCode.ROTATE_MORE_LEFT
            )
            out.append(
                FeedbackEvent(
                    kind=FeedbackKind.PROMPT,
                    prompt_code=code,
                    prompt_text=self._text(code),
                    audio_cue=AudioCue.GUIDING_TONE,
                )
            )
        return out

    def prompt_for(self, state: ExerciseState, cfg: ExerciseConfig) -> tuple[PromptCode, str, AudioCue]:
        """Continuous prompt for the current exercise state.

        Pure in (state, cfg). Priority: tracking loss, then posture
        faults (seated before alignment), then over-rotation safety,
        then hold coaching, then directional guidance.
        """
        code: PromptCode
        cue = AudioCue.NONE
        if state.phase == Phase.PAUSED:
            code = PromptCode.TRACKING_LOST
            cue = AudioCue.GUIDING_TONE
        elif state.posture.fault_reason is not None:
            code = (
                PromptCode.SIT_DOWN
                if state.posture.fault_reason == NOT_SEATED
                else PromptCode.SIT_UPRIGHT
            )
            cue = AudioCue.GUIDING_TONE
        elif state.phase == Phase.OVER_ROTATED:
            code = PromptCode.EASE_BACK
            cue = AudioCue.GUIDING_TONE
        elif state.phase in (Phase.HOLDING_RIGHT, Phase.HOLDING_LEFT):
            if state.hold_progress >= 1.0:
                code = (
                    PromptCode.PERFECT_RIGHT
                    if state.phase == Phase.HOLDING_RIGHT
                    else PromptCode.PERFECT_LEFT
                )
                cue = AudioCue.POSITIVE_CHIME
            else:
                code = PromptCode.GOOD_POSITION
        elif state.phase == Phase.RETURNING_TO_NEUTRAL:
            code = PromptCode.RETURN_TO_CENTER
        else:
            code = (
                PromptCode.ROTATE_MORE_RIGHT
                if state.current_side == RIGHT
                else PromptCode.ROTATE_MORE_LEFT
            )
            cue = AudioCue.GUIDING_TONE
        return code, self._text(code), cue
