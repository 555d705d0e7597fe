"""Torso geometry: rotation angle, shoulder-pelvis tilt, seated check.

Everything derives from the shoulder segment (landmark 11 -> 12) and hip
segment (23 -> 24). Rotation is measured in the transverse (x, z) plane,
tilt in the image (x, y) plane. Positive rotation means the subject
twists toward their own right, i.e. the right shoulder moves toward the
camera.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels

NOT_SEATED = "NotSeated"
MISALIGNED = "ShoulderPelvisMisaligned"

DEFAULT_SEATED_MAX_RATIO = 0.55
DEFAULT_TILT_MAX_DEG = 15.0


class DegenerateVector(ValueError):
    """Shoulder, hip or torso segment collapsed below measurable length."""


@dataclass(frozen=True)
class TorsoMetrics:
    rotation_deg: float
    shoulder_hip_tilt_deg: float
    seated_ratio: float


@dataclass(frozen=True)
class PostureStatus:
    is_seated: bool
    is_aligned: bool

    @property
    def fault_reason(self) -> str | None:
        # a standing user must sit back down before tilt feedback means
        # anything, so the seated check outranks alignment
        if not self.is_seated:
            return NOT_SEATED
        if not self.is_aligned:
            return MISALIGNED
        return None

    @property
    def ok(self) -> bool:
        return self.is_seated and self.is_aligned


POSTURE_OK = PostureStatus(True, True)


def torso_metrics(xyz: np.ndarray) -> TorsoMetrics:
    """Metrics for a single (33, 3) landmark array.

    Raises DegenerateVector when a segment projects to (near) zero
    length, which happens when landmarks coincide or the body is viewed
    edge-on; angles are meaningless there.
    """
    rot, tilt, ratio, degen = kernels.torso_metrics_batch(
        np.ascontiguousarray(xyz, dtype=np.float64)[np.newaxis]
    )
    if degen[0]:
        raise DegenerateVector(f"degenerate torso segments (bits={int(degen[0])})")
    return TorsoMetrics(float(rot[0]), float(tilt[0]), float(ratio[0]))


def torso_metrics_batch(xyz: np.ndarray):
    """Vectorized metrics for (N, 33, 3).

    Returns (rotation_deg, tilt_deg, seated_ratio, degenerate) arrays;
    instead of raising, degeneracy is flagged per frame in the bitmask.
    """
    return kernels.torso_metrics_batch(np.ascontiguousarray(xyz, dtype=np.float64))


def classify_posture(
    metrics: TorsoMetrics,
    seated_max_ratio: float = DEFAULT_SEATED_MAX_RATIO,
    tilt_max_deg: float = DEFAULT_TILT_MAX_DEG,
) -> PostureStatus:
    """Posture gates for the seated exercise.

    Seated: knees near hip height, (knee_mid_y - hip_mid_y) / torso_length
    strictly below seated_max_ratio (y grows downward, so standing pushes
    the ratio up). Aligned: shoulder line strictly within tilt_max_deg of
    the hip line.
    """
    return PostureStatus(
        is_seated=metrics.seated_ratio < seated_max_ratio,
        is_aligned=metrics.shoulder_hip_tilt_deg < tilt_max_deg,
    )
