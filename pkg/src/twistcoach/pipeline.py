"""Stream conditioning: visibility gating, smoothing, dropout handling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .landmarks import DEFAULT_VISIBILITY_THRESHOLD, LANDMARK_COUNT, TRACKED_LANDMARKS, PoseFrame

DEFAULT_ALPHA = 0.3
DEFAULT_DROPOUT_LIMIT = 30

_TRACKED = np.array(TRACKED_LANDMARKS, dtype=np.int64)


class DropoutExhausted(RuntimeError):
    """Raised by strict consumers when tracking has been lost too long."""


@dataclass
class ConditionedFrame:
    seq: int
    timestamp_us: int
    xyz: np.ndarray
    visibility: np.ndarray
    status: int

    @property
    def trackable(self) -> bool:
        return self.status == kernels.STATUS_OK


class PoseSmoother:
    """Exponential smoothing with hold-last-good dropout behaviour.

    Each trackable frame updates the per-coordinate EMA
    (s = alpha * x + (1 - alpha) * s, seeded verbatim from the first
    trackable frame). Visibility is passed through raw; confidence is a
    measurement, not a signal to smooth. Non-trackable frames repeat the
    last conditioned output without touching smoother state, and after
    dropout_limit consecutive misses the status escalates to EXHAUSTED so
    the exercise logic can pause instead of reasoning on stale pose.
    """

    def __init__(
        self,
        alpha: float = DEFAULT_ALPHA,
        visibility_threshold: float = DEFAULT_VISIBILITY_THRESHOLD,
        dropout_limit: int = DEFAULT_DROPOUT_LIMIT,
    ):
        if not 0.0 < alpha <= 1.0:
            raise ValueError("alpha must be in (0, 1]")
        self.alpha = float(alpha)
        self.visibility_threshold = float(visibility_threshold)
        self.dropout_limit = int(dropout_limit)
        self._ema = np.zeros((LANDMARK_COUNT, 3), dtype=np.float64)
        self._last_xyz = np.zeros((LANDMARK_COUNT, 3), dtype=np.float64)
        self._last_vis = np.zeros(LANDMARK_COUNT, dtype=np.float64)
        self._have_ema = 0
        self._have_last = 0
        self._dropout_count = 0

    def reset(self) -> None:
        self._ema[:] = 0.0
        self._last_xyz[:] = 0.0
        self._last_vis[:] = 0.0
        self._have_ema = 0
        self._have_last = 0
        self._dropout_count = 0

    @property
    def dropout_count(self) -> int:
        return self._dropout_count

    def update(self, frame: PoseFrame) -> ConditionedFrame:
        out_xyz, out_vis, status = self.update_batch(
            frame.xyz[np.newaxis], frame.visibility[np.newaxis]
        )
        return ConditionedFrame(
            seq=frame.seq,
            timestamp_us=frame.timestamp_us,
            xyz=out_xyz[0],
            visibility=out_vis[0],
            status=int(status[0]),
        )

    def update_batch(self, xyz: np.ndarray, vis: np.ndarray):
        """Condition N frames in one kernel call, carrying state across."""
        xyz = np.ascontiguousarray(xyz, dtype=np.float64)
        vis = np.ascontiguousarray(vis, dtype=np.float64)
        out_xyz, out_vis, status, have_ema, have_last, dropout = kernels.condition_batch(
            xyz,
            vis,
            _TRACKED,
            self.visibility_threshold,
            self.alpha,
            self._ema,
            self._have_ema,
            self._last_xyz,
            self._last_vis,
            self._have_last,
            self._dropout_count,
            self.dropout_limit,
        )
        self._have_ema = int(have_ema)
        self._have_last = int(have_last)
        self._dropout_count = int(dropout)
        return out_xyz, out_vis, status
