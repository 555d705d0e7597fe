"""Landmark sources: a webcam-backed one and a synthetic stand-in.

A source yields (timestamp_us, landmarks) tuples where landmarks is a
(33, 4) float array of x, y, z, visibility, or None when no person was
detected in the frame. Timestamps are capture time in microseconds and
must be monotonic.
"""

import math
import time
from typing import Iterator, Optional, Tuple

import numpy as np

Frame = Tuple[int, Optional[np.ndarray]]

# landmark indices the engine tracks (docs/protocol.md)
LEFT_SHOULDER = 11
RIGHT_SHOULDER = 12
LEFT_HIP = 23
RIGHT_HIP = 24
LEFT_KNEE = 25
RIGHT_KNEE = 26


class FakeSource:
    """Seated subject doing slow rotation reps, from pure trigonometry.

    Exists so the whole client path can run and be tested without a
    camera or a pose model. One rep: ramp to +45 over a second, hold
    long enough to count, come back. detect_gaps drills holes into the
    stream to exercise the engine's dropout handling.
    """

    def __init__(self, fps: float = 30.0, reps: int = 1, detect_gaps=()):
        self.fps = fps
        self.reps = reps
        self.detect_gaps = tuple(detect_gaps)  # (start_s, end_s) with no detection

    def _yaw_at(self, t: float) -> float:
        rep_len = 6.0  # 1 s rest, 1 s ramp up, 2.8 s hold, 1 s down, 0.2 s rest
        r = t % rep_len
        if t >= self.reps * rep_len:
            return 0.0
        if r < 1.0:
            return 0.0
        if r < 2.0:
            return 45.0 * (r - 1.0)
        if r < 4.8:
            return 45.0
        if r < 5.8:
            return 45.0 * (1.0 - (r - 4.8))
        return 0.0

    def _pose(self, yaw_deg: float) -> np.ndarray:
        data = np.zeros((33, 4), dtype=np.float64)
        data[:, 3] = 0.97
        t = math.radians(yaw_deg)
        # subject faces the camera: their left side at larger x, and
        # negative z toward the camera, so +yaw swings the right
        # shoulder forward
        for idx, half in ((LEFT_SHOULDER, 0.16), (RIGHT_SHOULDER, -0.16)):
            data[idx, 0] = 0.5 + half * math.cos(t)
            data[idx, 1] = 0.30
            data[idx, 2] = half * math.sin(t)
        for idx, half in ((LEFT_HIP, 0.10), (RIGHT_HIP, -0.10)):
            data[idx, 0] = 0.5 + half
            data[idx, 1] = 0.60
        data[LEFT_KNEE] = (0.60, 0.72, 0.0, 0.97)
        data[RIGHT_KNEE] = (0.40, 0.72, 0.0, 0.97)
        return data

    def frames(self) -> Iterator[Frame]:
        total = int(self.reps * 6.0 * self.fps) + 1
        for i in range(total):
            t = i / self.fps
            ts = int(round(t * 1e6))
            if any(a <= t < b for a, b in self.detect_gaps):
                yield ts, None
            else:
                yield ts, self._pose(self._yaw_at(t))


class MediaPipeSource:
    """Webcam frames through the mediapipe pose model.

    Imports of mediapipe and cv2 happen here, not at module load, so
    the synthetic path works on machines without either installed.
    """

    def __init__(self, camera_index: int = 0, width: int = 640, height: int = 480):
        try:
            import cv2
            import mediapipe as mp
        except ImportError as exc:
            raise RuntimeError(
                "camera capture needs the [camera] extra: pip install posecap[camera]"
            ) from exc

        self._cv2 = cv2
        self._cap = cv2.VideoCapture(camera_index)
        if not self._cap.isOpened():
            raise RuntimeError(f"cannot open camera {camera_index}")
        self._cap.set(cv2.CAP_PROP_FRAME_WIDTH, width)
        self._cap.set(cv2.CAP_PROP_FRAME_HEIGHT, height)
        self._pose = mp.solutions.pose.Pose(model_complexity=1)

    def frames(self) -> Iterator[Frame]:
        cv2 = self._cv2
        while True:
            ok, frame = self._cap.read()
            if not ok:
                return
            ts = time.monotonic_ns() // 1000
            result = self._pose.process(cv2.cvtColor(frame, cv2.COLOR_BGR2RGB))
            if not result.pose_landmarks:
                yield ts, None
                continue
            data = np.array(
                [(lm.x, lm.y, lm.z, lm.visibility) for lm in result.pose_landmarks.landmark],
                dtype=np.float64,
            )
            yield ts, data

    def close(self) -> None:
        self._cap.release()
        self._pose.close()
