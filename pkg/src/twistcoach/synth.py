"""Synthetic seated-rotation trajectories with exact ground truth.

The skeleton is built by inverting the measurement geometry: a neutral
shoulder segment is rotated about the vertical axis through the hip
midline by the commanded yaw, so the torso-rotation formula recovers the
command exactly (up to float rounding). That makes the generator its own
oracle: the ground-truth channel emitted with every frame is the
commanded angle before noise.

Coordinates are normalized image space, subject facing the camera:
x grows to the image right (the subject's left side), y grows downward,
z grows away from the camera. Positive yaw turns the subject toward
their right, bringing the right shoulder toward the camera.

All randomness comes from numpy's PCG64 generator under spec.seed, and
that algorithm identity is part of the recording header so fixtures stay
reproducible across machines.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .landmarks import LANDMARK_COUNT, PoseFrame
from . import protocol

RNG_ALGORITHM = "numpy-pcg64"

# body plan in normalized image coordinates
CENTER_X = 0.5
SHOULDER_Y = 0.30
HIP_Y = 0.60
SHOULDER_HALF = 0.16
HIP_HALF = 0.10
KNEE_HALF = 0.11
TORSO_LEN = HIP_Y - SHOULDER_Y
SEATED_KNEE_DROP = 0.4  # knee_y = hip_y + drop * torso_len
STANDING_KNEE_DROP = 0.8
FAULT_TILT_DEG = 20.0
BASE_VISIBILITY = 0.98

LEAD_IN_S = 1.0
TAIL_S = 1.0
DWELL_FRACTION = 0.25

FAULT_TILT = "tilt"
FAULT_STAND = "stand"

# (index, x offset from center, y, upper-body flag) for the landmarks the
# exercise ignores; kept anatomically plausible so a UI can draw them.
# The subject's left side sits at positive x offsets (non-mirrored view).
_EXTRAS = [
    (0, 0.000, 0.105, True),  # nose
    (1, 0.012, 0.095, True),
    (2, 0.020, 0.095, True),
    (3, 0.028, 0.095, True),
    (4, -0.012, 0.095, True),
    (5, -0.020, 0.095, True),
    (6, -0.028, 0.095, True),
    (7, 0.045, 0.105, True),  # ears
    (8, -0.045, 0.105, True),
    (9, 0.015, 0.135, True),  # mouth
    (10, -0.015, 0.135, True),
    (13, 0.205, 0.44, True),  # elbows
    (14, -0.205, 0.44, True),
    (15, 0.215, 0.57, True),  # wrists
    (16, -0.215, 0.57, True),
    (17, 0.225, 0.60, True),
    (18, -0.225, 0.60, True),
    (19, 0.222, 0.61, True),
    (20, -0.222, 0.61, True),
    (21, 0.215, 0.60, True),
    (22, -0.215, 0.60, True),
]


@dataclass(frozen=True)
class TrajectorySpec:
    amplitude_deg: float = 45.0
    period_s: float = 10.0  # one full right+left cycle
    hold_s: float = 2.5
    reps: int = 5
    fps: float = 30.0
    noise_deg: float = 0.0
    dropout_segments: tuple[tuple[float, float], ...] = ()
    posture_fault_segments: tuple[tuple[float, float, str], ...] = ()
    seed: int = 0

    def __post_init__(self):
        if not 1.0 <= self.fps <= 120.0:
            raise ValueError("fps must be within [1, 120]")
        if not 0.0 <= self.amplitude_deg <= 90.0:
            raise ValueError("amplitude_deg must be within [0, 90]")
        if self.reps < 0:
            raise ValueError("reps must be non-negative")
        if self.noise_deg < 0:
            raise ValueError("noise_deg must be non-negative")
        if self.ramp_s <= 0:
            raise ValueError(
                "period too short: needs period_s/2 > dwell + hold_s for the ramps"
            )
        for seg in self.posture_fault_segments:
            if seg[2] not in (FAULT_TILT, FAULT_STAND):
                raise ValueError(f"unknown posture fault kind {seg[2]!r}")

    @property
    def half_s(self) -> float:
        return self.period_s / 2.0

    @property
    def dwell_s(self) -> float:
        return DWELL_FRACTION * self.half_s

    @property
    def ramp_s(self) -> float:
        return (self.half_s - self.dwell_s - self.hold_s) / 2.0

    @property
    def duration_s(self) -> float:
        return LEAD_IN_S + self.reps * self.half_s + TAIL_S

    @property
    def frame_count(self) -> int:
        return int(math.floor(self.duration_s * self.fps)) + 1

    @staticmethod
    def from_json_file(path: str) -> "TrajectorySpec":
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ValueError("trajectory spec must be a JSON object")
        data = dict(data)
        if "dropout_segments" in data:
            data["dropout_segments"] = tuple(tuple(seg) for seg in data["dropout_segments"])
        if "posture_fault_segments" in data:
            data["posture_fault_segments"] = tuple(
                tuple(seg) for seg in data["posture_fault_segments"]
            )
        return TrajectorySpec(**data)


def truth_profile(spec: TrajectorySpec, t: np.ndarray) -> np.ndarray:
    """Commanded yaw in degrees at times t (seconds): a trapezoid per
    rep (ramp, hold, ramp), alternating sides, right first."""
    tt = t - LEAD_IN_S
    rep_idx = np.floor(tt / spec.half_s).astype(np.int64)
    u = tt - rep_idx * spec.half_s
    active = (tt >= 0.0) & (rep_idx < spec.reps)
    sign = np.where(rep_idx % 2 == 0, 1.0, -1.0)

    d, r, h = spec.dwell_s, spec.ramp_s, spec.hold_s
    a = spec.amplitude_deg
    up = np.clip((u - d) / r, 0.0, 1.0)
    down = np.clip((u - d - r - h) / r, 0.0, 1.0)
    mag = a * (up - down)
    return np.where(active, sign * mag, 0.0)


def _in_segments(t: np.ndarray, segments) -> np.ndarray:
    mask = np.zeros(t.shape, dtype=bool)
    for seg in segments:
        mask |= (t >= seg[0]) & (t < seg[1])
    return mask


def build_arrays(spec: TrajectorySpec):
    """Whole trajectory as arrays.

    Returns (timestamps_us int64 (N,), data float64 (N,33,4), truth_deg
    float64 (N,)). truth_deg carries the commanded pre-noise yaw.
    """
    n = spec.frame_count
    idx = np.arange(n, dtype=np.int64)
    timestamps = np.round(idx * (1e6 / spec.fps)).astype(np.int64)
    t = idx / spec.fps

    truth = truth_profile(spec, t)
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    yaw = truth + (rng.normal(0.0, spec.noise_deg, n) if spec.noise_deg > 0 else 0.0)

    tilt = np.where(
        _in_segments(t, [s for s in spec.posture_fault_segments if s[2] == FAULT_TILT]),
        math.radians(FAULT_TILT_DEG),
        0.0,
    )
    knee_drop = np.where(
        _in_segments(t, [s for s in spec.posture_fault_segments if s[2] == FAULT_STAND]),
        STANDING_KNEE_DROP,
        SEATED_KNEE_DROP,
    )
    visible = ~_in_segments(t, spec.dropout_segments)

    yaw_rad = np.radians(yaw)
    cos_yaw, sin_yaw = np.cos(yaw_rad), np.sin(yaw_rad)
    cos_tilt, sin_tilt = np.cos(tilt), np.sin(tilt)

    data = np.zeros((n, LANDMARK_COUNT, 4), dtype=np.float64)
    data[:, :, 3] = np.where(visible, BASE_VISIBILITY, 0.0)[:, np.newaxis]

    def place_pair(left_idx, right_idx, half, y, rotated):
        # subject's left at +x; tilt rocks the segment in the image
        # plane, yaw swings it in the transverse plane
        for idx_lm, side in ((left_idx, 1.0), (right_idx, -1.0)):
            dx = side * half
            if rotated:
                dx_t = dx * cos_tilt
                dy_t = dx * sin_tilt
                data[:, idx_lm, 0] = CENTER_X + dx_t * cos_yaw
                data[:, idx_lm, 1] = y + dy_t
                data[:, idx_lm, 2] = dx_t * sin_yaw
            else:
                data[:, idx_lm, 0] = CENTER_X + dx
                data[:, idx_lm, 1] = y
                data[:, idx_lm, 2] = 0.0

    place_pair(11, 12, SHOULDER_HALF, SHOULDER_Y, rotated=True)
    place_pair(23, 24, HIP_HALF, HIP_Y, rotated=False)

    knee_y = HIP_Y + knee_drop * TORSO_LEN
    for idx_lm, side in ((25, 1.0), (26, -1.0)):
        data[:, idx_lm, 0] = CENTER_X + side * KNEE_HALF
        data[:, idx_lm, 1] = knee_y
    for idx_lm, side in ((27, 1.0), (28, -1.0)):  # ankles
        data[:, idx_lm, 0] = CENTER_X + side * KNEE_HALF
        data[:, idx_lm, 1] = knee_y + 0.18
    for idx_lm, side in ((29, 1.0), (30, -1.0), (31, 1.0), (32, -1.0)):  # feet
        data[:, idx_lm, 0] = CENTER_X + side * (KNEE_HALF + 0.02)
        data[:, idx_lm, 1] = knee_y + 0.22

    for idx_lm, dx, y, upper in _EXTRAS:
        if upper:
            data[:, idx_lm, 0] = CENTER_X + dx * cos_yaw
            data[:, idx_lm, 1] = y
            data[:, idx_lm, 2] = dx * sin_yaw
        else:
            data[:, idx_lm, 0] = CENTER_X + dx
            data[:, idx_lm, 1] = y

    return timestamps, data, truth


def generate(spec: TrajectorySpec) -> Iterator[tuple[PoseFrame, float]]:
    """Yield (PoseFrame, ground_truth_deg) for the whole trajectory."""
    timestamps, data, truth = build_arrays(spec)
    for i in range(len(timestamps)):
        frame = PoseFrame(seq=i, timestamp_us=int(timestamps[i]), data=data[i])
        yield frame, float(truth[i])


def packets(spec: TrajectorySpec) -> Iterator[tuple[int, bytes]]:
    """Encoded (delta_us, PosePacket bytes) stream, ready to record or send."""
    prev_ts = None
    for frame, _truth in generate(spec):
        delta = 0 if prev_ts is None else frame.timestamp_us - prev_ts
        prev_ts = frame.timestamp_us
        yield delta, protocol.encode_pose(frame)
