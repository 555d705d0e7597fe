"""Shared helpers for the engine tests.

place_torso builds landmark arrays straight from trigonometry, on
purpose not reusing the trajectory generator: tests that check angles
need a pose construction that is independent of the code under test.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from twistcoach.landmarks import (
    LANDMARK_COUNT,
    LEFT_HIP,
    LEFT_KNEE,
    LEFT_SHOULDER,
    RIGHT_HIP,
    RIGHT_KNEE,
    RIGHT_SHOULDER,
    PoseFrame,
)

# frame-local body plan; subject faces the camera, so the subject's left
# side sits at larger x (not mirrored) and negative z is toward the camera
CX = 0.5
SHOULDER_Y = 0.30
HIP_Y = 0.60
KNEE_Y_SEATED = 0.72
SHOULDER_HALF = 0.16
HIP_HALF = 0.10


def place_torso(
    yaw_deg: float = 0.0,
    hip_yaw_deg: float = 0.0,
    shoulder_roll_deg: float = 0.0,
    knee_y: float = KNEE_Y_SEATED,
    visibility: float = 0.98,
) -> np.ndarray:
    """(33, 4) landmark array with the torso at the given angles.

    yaw is rotation about the vertical axis (x, z plane), positive
    turning the right shoulder toward the camera; roll tilts the
    shoulder line in the image plane (x, y).
    """
    data = np.zeros((LANDMARK_COUNT, 4), dtype=np.float64)
    data[:, 3] = visibility

    def rotate(dx: float, dy: float, theta_deg: float, roll_deg: float = 0.0):
        r = math.radians(roll_deg)
        dx2 = dx * math.cos(r) - dy * math.sin(r)
        dy2 = dx * math.sin(r) + dy * math.cos(r)
        t = math.radians(theta_deg)
        return dx2 * math.cos(t), dy2, dx2 * math.sin(t)

    for idx, half, base_y, theta, roll in (
        (LEFT_SHOULDER, +SHOULDER_HALF, SHOULDER_Y, yaw_deg, shoulder_roll_deg),
        (RIGHT_SHOULDER, -SHOULDER_HALF, SHOULDER_Y, yaw_deg, shoulder_roll_deg),
        (LEFT_HIP, +HIP_HALF, HIP_Y, hip_yaw_deg, 0.0),
        (RIGHT_HIP, -HIP_HALF, HIP_Y, hip_yaw_deg, 0.0),
    ):
        dx, dy, dz = rotate(half, 0.0, theta, roll)
        data[idx, 0] = CX + dx
        data[idx, 1] = base_y + dy
        data[idx, 2] = dz

    data[LEFT_KNEE] = (CX + HIP_HALF, knee_y, 0.0, visibility)
    data[RIGHT_KNEE] = (CX - HIP_HALF, knee_y, 0.0, visibility)
    return data


def make_frame(seq: int = 0, timestamp_us: int = 0, **kwargs) -> PoseFrame:
    return PoseFrame(seq=seq, timestamp_us=timestamp_us, data=place_torso(**kwargs))


@pytest.fixture
def torso():
    return place_torso
