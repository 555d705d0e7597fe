#!/usr/bin/env python3
"""Compare the jitted and pure-numpy kernel backends on the same stream.

Times the two hot operations (stream conditioning, torso metrics) in
the two shapes that matter: whole-batch (replay/analysis) and
frame-at-a-time (the live path), and checks both backends produce
bit-identical output while at it.

Usage: python3 benchmarks/bench_kernels.py [--frames 9000] [--repeats 5]
"""

import argparse
import os
import sys
import time

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from twistcoach.kernels import _numpy  # noqa: E402
from twistcoach.landmarks import TRACKED_LANDMARKS  # noqa: E402
from twistcoach.synth import TrajectorySpec, build_arrays  # noqa: E402

try:
    from twistcoach.kernels import _numba
except ImportError:
    _numba = None

TAU = 0.9
ALPHA = 0.3
DROPOUT_LIMIT = 30


def make_stream(frames: int):
    spec = TrajectorySpec(reps=5, noise_deg=1.5, seed=3)
    _, data, _ = build_arrays(spec)
    reps = frames // data.shape[0] + 1
    data = np.tile(data, (reps, 1, 1))[:frames]
    xyz = np.ascontiguousarray(data[:, :, :3])
    vis = np.ascontiguousarray(data[:, :, 3])
    return xyz, vis


def fresh_state():
    return {
        "ema": np.zeros((33, 3), dtype=np.float64),
        "have_ema": 0,
        "last_xyz": np.zeros((33, 3), dtype=np.float64),
        "last_vis": np.zeros(33, dtype=np.float64),
        "have_last": 0,
        "dropout_count": 0,
    }


def run_condition(impl, xyz, vis, tracked, chunk):
    st = fresh_state()
    outs = []
    for i in range(0, xyz.shape[0], chunk):
        out_xyz, out_vis, status, st["have_ema"], st["have_last"], st["dropout_count"] = (
            impl.condition_batch(
                xyz[i : i + chunk],
                vis[i : i + chunk],
                tracked,
                TAU,
                ALPHA,
                st["ema"],
                st["have_ema"],
                st["last_xyz"],
                st["last_vis"],
                st["have_last"],
                st["dropout_count"],
                DROPOUT_LIMIT,
            )
        )
        outs.append(out_xyz)
    return np.concatenate(outs)


def bench(label, fn, repeats):
    best = min(_timed(fn) for _ in range(repeats))
    return label, best


def _timed(fn):
    t0 = time.perf_counter_ns()
    fn()
    return time.perf_counter_ns() - t0


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--frames", type=int, default=9000, help="stream length (default 9000 = 5 min at 30 FPS)")
    ap.add_argument("--repeats", type=int, default=5, help="timing repeats, best-of (default 5)")
    args = ap.parse_args()

    xyz, vis = make_stream(args.frames)
    tracked = np.asarray(TRACKED_LANDMARKS, dtype=np.int64)
    n = xyz.shape[0]
    backends = [("numpy", _numpy)]
    if _numba is not None:
        _numba.warmup()
        backends.append(("numba", _numba))
    else:
        print("numba not importable; timing the numpy backend only\n")

    # correctness first. conditioning carries stream state, so it must be
    # bit-exact across backends; the stateless metrics may differ in the
    # last ulps (SIMD vs libm atan2), bounded far below wire precision.
    ref_cond = run_condition(_numpy, xyz, vis, tracked, chunk=n)
    ref_metrics = _numpy.torso_metrics_batch(ref_cond)
    for name, impl in backends:
        got = run_condition(impl, xyz, vis, tracked, chunk=1)
        assert got.tobytes() == ref_cond.tobytes(), f"{name} conditioning diverged"
        m = impl.torso_metrics_batch(ref_cond)
        assert np.array_equal(m[3], ref_metrics[3]), f"{name} degenerate mask diverged"
        for a, b in zip(m[:3], ref_metrics[:3]):
            assert np.max(np.abs(a - b)) <= 1e-9, f"{name} metrics diverged"
    print(f"backends agree on {n} frames (conditioning bit-exact, metrics <= 1e-9)\n")

    rows = []
    for name, impl in backends:
        rows.append((name, "condition, whole batch",
                     min(_timed(lambda: run_condition(impl, xyz, vis, tracked, n))
                         for _ in range(args.repeats))))
        rows.append((name, "condition, frame at a time",
                     min(_timed(lambda: run_condition(impl, xyz, vis, tracked, 1))
                         for _ in range(args.repeats))))
        rows.append((name, "metrics, whole batch",
                     min(_timed(lambda: impl.torso_metrics_batch(ref_cond))
                         for _ in range(args.repeats))))
        one = np.ascontiguousarray(ref_cond[:1])
        rows.append((name, "metrics, frame at a time",
                     min(_timed(lambda: [impl.torso_metrics_batch(one) for _ in range(n)])
                         for _ in range(args.repeats))))

    print(f"{'backend':<8} {'operation':<28} {'total ms':>9} {'us/frame':>9}")
    print("-" * 58)
    base = {}
    for name, op, ns in rows:
        base.setdefault(op, ns)
        speedup = base[op] / ns
        mark = f"  ({speedup:.1f}x)" if name != "numpy" else ""
        print(f"{name:<8} {op:<28} {ns / 1e6:>9.2f} {ns / n / 1000:>9.2f}{mark}")


if __name__ == "__main__":
    main()
