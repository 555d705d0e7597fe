"""Real-time feedback engine for seated torso-rotation exercise.

Pose frames stream in as datagrams, get smoothed and reduced to torso
kinematics, drive an exercise state machine with gamified scoring, and
come back out as compact feedback packets plus a JSON session log.
"""

from .config import ConfigError, EngineConfig, ExerciseConfig, load_config
from .engine import FrameEngine, LatencyStats, replay_records
from .fsm import ExerciseFsm, ExerciseState, Phase, RepRecord
from .kinematics import DegenerateVector, TorsoMetrics, classify_posture, torso_metrics
from .landmarks import LANDMARK_COUNT, PoseFrame
from .pipeline import PoseSmoother
from .protocol import (
    FEEDBACK_PACKET_SIZE,
    POSE_PACKET_SIZE,
    FeedbackState,
    ProtocolError,
    decode_feedback,
    decode_pose,
    encode_feedback,
    encode_pose,
)
from .scoring import AudioCue, PromptCode, ScoreKeeper
from .session import SessionLog, read_session, session_accuracy, write_session
from .synth import TrajectorySpec

__version__ = "0.1.0"

__all__ = [
    "AudioCue",
    "ConfigError",
    "DegenerateVector",
    "EngineConfig",
    "ExerciseConfig",
    "ExerciseFsm",
    "ExerciseState",
    "FEEDBACK_PACKET_SIZE",
    "FeedbackState",
    "FrameEngine",
    "LANDMARK_COUNT",
    "LatencyStats",
    "Phase",
    "POSE_PACKET_SIZE",
    "PoseFrame",
    "PoseSmoother",
    "PromptCode",
    "ProtocolError",
    "RepRecord",
    "ScoreKeeper",
    "SessionLog",
    "TorsoMetrics",
    "TrajectorySpec",
    "classify_posture",
    "decode_feedback",
    "decode_pose",
    "encode_feedback",
    "encode_pose",
    "load_config",
    "read_session",
    "replay_records",
    "session_accuracy",
    "torso_metrics",
    "write_session",
    "__version__",
]
