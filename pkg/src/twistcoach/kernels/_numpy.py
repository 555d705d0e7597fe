"""Pure-numpy kernel implementations.

These are the reference semantics. The numba backend mirrors this file
operation for operation so both produce identical floating point output;
keep the arithmetic expression forms in sync when editing either one.
"""

from __future__ import annotations

import numpy as np

STATUS_OK = 0
STATUS_DROPOUT = 1
STATUS_EXHAUSTED = 2

DEGEN_SHOULDER = 1
DEGEN_HIP = 2
DEGEN_TORSO = 4

_EPS = 1e-6


def condition_batch(
    xyz: np.ndarray,
    vis: np.ndarray,
    tracked: np.ndarray,
    tau: float,
    alpha: float,
    ema: np.ndarray,
    have_ema: int,
    last_xyz: np.ndarray,
    last_vis: np.ndarray,
    have_last: int,
    dropout_count: int,
    dropout_limit: int,
):
    """Run visibility gating plus EMA smoothing over a frame batch.

    xyz is (N, 33, 3), vis is (N, 33). ema/last_xyz/last_vis are carried
    state, mutated in place, so consecutive calls continue one stream.
    Returns (out_xyz, out_vis, status, have_ema, have_last, dropout_count).

    A frame is trackable when every tracked landmark has visibility
    strictly above tau. Trackable frames update the smoother
    (s = alpha * x + (1 - alpha) * s); the first one seeds it verbatim.
    Non-trackable frames emit the last good conditioned frame and bump
    the dropout counter; once the counter exceeds dropout_limit the
    status escalates from DROPOUT to EXHAUSTED. Dropout never touches
    the smoother state.
    """
    n = xyz.shape[0]
    out_xyz = np.empty_like(xyz)
    out_vis = np.empty_like(vis)
    status = np.empty(n, dtype=np.uint8)

    one_minus = 1.0 - alpha
    for i in range(n):
        trackable = True
        for t in tracked:
            if not vis[i, t] > tau:
                trackable = False
                break
        if trackable:
            if have_ema:
                ema[:] = alpha * xyz[i] + one_minus * ema
            else:
                ema[:] = xyz[i]
                have_ema = 1
            dropout_count = 0
            last_xyz[:] = ema
            last_vis[:] = vis[i]
            have_last = 1
            out_xyz[i] = ema
            out_vis[i] = vis[i]
            status[i] = STATUS_OK
        else:
            dropout_count += 1
            if have_last:
                out_xyz[i] = last_xyz
                out_vis[i] = last_vis
            else:
                out_xyz[i] = xyz[i]
                out_vis[i] = vis[i]
            if dropout_count > dropout_limit:
                status[i] = STATUS_EXHAUSTED
            else:
                status[i] = STATUS_DROPOUT
    return out_xyz, out_vis, status, have_ema, have_last, dropout_count


def _wrap180(d: np.ndarray) -> np.ndarray:
    # into (-180, 180]
    v = np.mod(d + 180.0, 360.0)
    v = np.where(v <= 0.0, v + 360.0, v)
    return v - 180.0


def _wrap90(d: np.ndarray) -> np.ndarray:
    # into (-90, 90]
    v = np.mod(d + 90.0, 180.0)
    v = np.where(v <= 0.0, v + 180.0, v)
    return v - 90.0


def torso_metrics_batch(xyz: np.ndarray):
    """Torso rotation, shoulder tilt and seated ratio for (N, 33, 3) coords.

    Rotation is the transverse-plane (x, z) angle from the hip line to the
    shoulder line, wrapped into (-180, 180], positive when the subject
    twists to their right. Tilt is the absolute difference of the two
    segment inclinations in the image plane (x, y), in [0, 90]. Seated
    ratio is (knee_mid_y - hip_mid_y) / torso_length.

    Returns (rotation_deg, tilt_deg, seated_ratio, degenerate) where
    degenerate is a uint8 bitmask (shoulder / hip / torso near zero
    length); metric values are unreliable wherever their input bit is set.
    """
    ls = xyz[:, 11, :]
    rs = xyz[:, 12, :]
    lh = xyz[:, 23, :]
    rh = xyz[:, 24, :]
    lk = xyz[:, 25, :]
    rk = xyz[:, 26, :]

    sx = rs[:, 0] - ls[:, 0]
    sy = rs[:, 1] - ls[:, 1]
    sz = rs[:, 2] - ls[:, 2]
    hx = rh[:, 0] - lh[:, 0]
    hy = rh[:, 1] - lh[:, 1]
    hz = rh[:, 2] - lh[:, 2]

    s_norm = np.sqrt(sx * sx + sz * sz)
    h_norm = np.sqrt(hx * hx + hz * hz)

    rot = _wrap180(np.degrees(np.arctan2(sz, sx) - np.arctan2(hz, hx)))

    incl_s = _wrap90(np.degrees(np.arctan2(sy, sx)))
    incl_h = _wrap90(np.degrees(np.arctan2(hy, hx)))
    tilt = np.abs(_wrap90(incl_s - incl_h))

    sh_mid_x = (ls[:, 0] + rs[:, 0]) * 0.5
    sh_mid_y = (ls[:, 1] + rs[:, 1]) * 0.5
    hip_mid_x = (lh[:, 0] + rh[:, 0]) * 0.5
    hip_mid_y = (lh[:, 1] + rh[:, 1]) * 0.5
    knee_mid_y = (lk[:, 1] + rk[:, 1]) * 0.5

    dx = sh_mid_x - hip_mid_x
    dy = sh_mid_y - hip_mid_y
    torso_len = np.sqrt(dx * dx + dy * dy)

    degenerate = np.zeros(xyz.shape[0], dtype=np.uint8)
    degenerate |= np.where(s_norm < _EPS, DEGEN_SHOULDER, 0).astype(np.uint8)
    degenerate |= np.where(h_norm < _EPS, DEGEN_HIP, 0).astype(np.uint8)
    degenerate |= np.where(torso_len < _EPS, DEGEN_TORSO, 0).astype(np.uint8)

    safe_len = np.where(torso_len < _EPS, 1.0, torso_len)
    ratio = (knee_mid_y - hip_mid_y) / safe_len

    return rot, tilt, ratio, degenerate
