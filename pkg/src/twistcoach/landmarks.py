"""Pose landmark topology and frame containers.

A pose frame is 33 landmarks in normalized image coordinates: x, y in
[0, 1] with the origin at the top-left of the image, z increasing away
from the camera, plus a per-landmark visibility confidence in [0, 1].
Only the torso landmarks below drive the exercise analysis; the rest are
carried through for display.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LANDMARK_COUNT = 33

# Indices of the landmarks the engine actually reasons about.
LEFT_SHOULDER = 11
RIGHT_SHOULDER = 12
LEFT_HIP = 23
RIGHT_HIP = 24
LEFT_KNEE = 25
RIGHT_KNEE = 26

# Trackability is gated on these six; face/arm landmarks may flicker
# freely without pausing the exercise.
TRACKED_LANDMARKS = (
    LEFT_SHOULDER,
    RIGHT_SHOULDER,
    LEFT_HIP,
    RIGHT_HIP,
    LEFT_KNEE,
    RIGHT_KNEE,
)

DEFAULT_VISIBILITY_THRESHOLD = 0.9


@dataclass
class PoseFrame:
    """One timestamped pose sample.

    data is a (33, 4) float64 array with columns x, y, z, visibility.
    timestamp_us is the capture time in microseconds; seq is the sender's
    wrapping packet counter.
    """

    seq: int
    timestamp_us: int
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.shape != (LANDMARK_COUNT, 4):
            raise ValueError(f"pose data must be (33, 4), got {arr.shape}")
        self.data = arr

    @property
    def xyz(self) -> np.ndarray:
        return self.data[:, :3]

    @property
    def visibility(self) -> np.ndarray:
        return self.data[:, 3]

    def is_trackable(self, threshold: float = DEFAULT_VISIBILITY_THRESHOLD) -> bool:
        """True when every gated torso landmark clears the visibility bar.

        The comparison is strict: a landmark sitting exactly at the
        threshold does not count as visible.
        """
        vis = self.data[list(TRACKED_LANDMARKS), 3]
        return bool(np.all(vis > threshold))


def landmark(frame_data: np.ndarray, index: int) -> np.ndarray:
    """xyz of one landmark from a (33, 4) array."""
    return frame_data[index, :3]
