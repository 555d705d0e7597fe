"""Numba-jitted kernels.

Same semantics as _numpy.py, expressed as scalar loops so numba can
compile them. fastmath stays off: reassociation would break the
bit-for-bit agreement with the numpy backend that the tests pin down.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_DROPOUT = 1
STATUS_EXHAUSTED = 2

DEGEN_SHOULDER = 1
DEGEN_HIP = 2
DEGEN_TORSO = 4

_EPS = 1e-6


@njit(cache=True)
def condition_batch(
    xyz,
    vis,
    tracked,
    tau,
    alpha,
    ema,
    have_ema,
    last_xyz,
    last_vis,
    have_last,
    dropout_count,
    dropout_limit,
):
    n = xyz.shape[0]
    out_xyz = np.empty_like(xyz)
    out_vis = np.empty_like(vis)
    status = np.empty(n, dtype=np.uint8)

    one_minus = 1.0 - alpha
    for i in range(n):
        trackable = True
        for k in range(tracked.shape[0]):
            if not vis[i, tracked[k]] > tau:
                trackable = False
                break
        if trackable:
            if have_ema:
                for j in range(ema.shape[0]):
                    for c in range(3):
                        ema[j, c] = alpha * xyz[i, j, c] + one_minus * ema[j, c]
            else:
                for j in range(ema.shape[0]):
                    for c in range(3):
                        ema[j, c] = xyz[i, j, c]
                have_ema = 1
            dropout_count = 0
            for j in range(ema.shape[0]):
                for c in range(3):
                    last_xyz[j, c] = ema[j, c]
                    out_xyz[i, j, c] = ema[j, c]
                last_vis[j] = vis[i, j]
                out_vis[i, j] = vis[i, j]
            have_last = 1
            status[i] = STATUS_OK
        else:
            dropout_count += 1
            if have_last:
                for j in range(last_xyz.shape[0]):
                    for c in range(3):
                        out_xyz[i, j, c] = last_xyz[j, c]
                    out_vis[i, j] = last_vis[j]
            else:
                for j in range(last_xyz.shape[0]):
                    for c in range(3):
                        out_xyz[i, j, c] = xyz[i, j, c]
                    out_vis[i, j] = vis[i, j]
            if dropout_count > dropout_limit:
                status[i] = STATUS_EXHAUSTED
            else:
                status[i] = STATUS_DROPOUT
    return out_xyz, out_vis, status, have_ema, have_last, dropout_count


@njit(cache=True)
def _wrap180(d):
    # float % here is floored modulo, the same operation (and the same
    # bits) as np.mod on the vector path; only the zero boundary needs
    # the nudge that maps -180 onto +180
    m = (d + 180.0) % 360.0
    if m <= 0.0:
        m += 360.0
    return m - 180.0


@njit(cache=True)
def _wrap90(d):
    m = (d + 90.0) % 180.0
    if m <= 0.0:
        m += 180.0
    return m - 90.0


@njit(cache=True)
def torso_metrics_batch(xyz):
    n = xyz.shape[0]
    rot = np.empty(n, dtype=np.float64)
    tilt = np.empty(n, dtype=np.float64)
    ratio = np.empty(n, dtype=np.float64)
    degenerate = np.zeros(n, dtype=np.uint8)

    for i in range(n):
        sx = xyz[i, 12, 0] - xyz[i, 11, 0]
        sy = xyz[i, 12, 1] - xyz[i, 11, 1]
        sz = xyz[i, 12, 2] - xyz[i, 11, 2]
        hx = xyz[i, 24, 0] - xyz[i, 23, 0]
        hy = xyz[i, 24, 1] - xyz[i, 23, 1]
        hz = xyz[i, 24, 2] - xyz[i, 23, 2]

        s_norm = math.sqrt(sx * sx + sz * sz)
        h_norm = math.sqrt(hx * hx + hz * hz)

        rot[i] = _wrap180(math.degrees(math.atan2(sz, sx) - math.atan2(hz, hx)))

        incl_s = _wrap90(math.degrees(math.atan2(sy, sx)))
        incl_h = _wrap90(math.degrees(math.atan2(hy, hx)))
        tilt[i] = abs(_wrap90(incl_s - incl_h))

        sh_mid_x = (xyz[i, 11, 0] + xyz[i, 12, 0]) * 0.5
        sh_mid_y = (xyz[i, 11, 1] + xyz[i, 12, 1]) * 0.5
        hip_mid_x = (xyz[i, 23, 0] + xyz[i, 24, 0]) * 0.5
        hip_mid_y = (xyz[i, 23, 1] + xyz[i, 24, 1]) * 0.5
        knee_mid_y = (xyz[i, 25, 1] + xyz[i, 26, 1]) * 0.5

        dx = sh_mid_x - hip_mid_x
        dy = sh_mid_y - hip_mid_y
        torso_len = math.sqrt(dx * dx + dy * dy)

        d = 0
        if s_norm < _EPS:
            d |= DEGEN_SHOULDER
        if h_norm < _EPS:
            d |= DEGEN_HIP
        if torso_len < _EPS:
            d |= DEGEN_TORSO
        degenerate[i] = d

        safe_len = torso_len
        if torso_len < _EPS:
            safe_len = 1.0
        ratio[i] = (knee_mid_y - hip_mid_y) / safe_len

    return rot, tilt, ratio, degenerate


def warmup():
    """Force-compile the jitted kernels on a tiny input."""
    xyz = np.zeros((2, 33, 3), dtype=np.float64)
    xyz[:, 11, 0] = 0.4
    xyz[:, 12, 0] = 0.6
    xyz[:, 23, 0] = 0.45
    xyz[:, 24, 0] = 0.55
    xyz[:, 23, 1] = 0.6
    xyz[:, 24, 1] = 0.6
    xyz[:, 25, 1] = 0.8
    xyz[:, 26, 1] = 0.8
    vis = np.ones((2, 33), dtype=np.float64)
    tracked = np.array([11, 12, 23, 24, 25, 26], dtype=np.int64)
    ema = np.zeros((33, 3), dtype=np.float64)
    last_xyz = np.zeros((33, 3), dtype=np.float64)
    last_vis = np.zeros(33, dtype=np.float64)
    condition_batch(xyz, vis, tracked, 0.9, 0.3, ema, 0, last_xyz, last_vis, 0, 0, 30)
    torso_metrics_batch(xyz)
