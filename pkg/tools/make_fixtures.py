#!/usr/bin/env python3
"""Regenerate everything under fixtures/.

All outputs are deterministic (fixed seeds, fixed timestamps), so a
rerun after an intentional behaviour change produces a reviewable diff
and an accidental change shows up as fixture churn in git status.

Run from the repository root:  python3 tools/make_fixtures.py
"""

import csv
import io
import json
import os
import random
import sys
from contextlib import redirect_stdout
from datetime import datetime, timezone

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from twistcoach import protocol, recording, session  # noqa: E402
from twistcoach.cli import main as cli_main  # noqa: E402
from twistcoach.engine import replay_records  # noqa: E402
from twistcoach.fsm import Phase  # noqa: E402
from twistcoach.questionnaires import sus_score  # noqa: E402
from twistcoach.scoring import AudioCue, PromptCode  # noqa: E402
from twistcoach.synth import TrajectorySpec, packets as synth_packets  # noqa: E402

ROOT = os.path.normpath(os.path.join(os.path.dirname(__file__), ".."))
FIXTURES = os.path.join(ROOT, "fixtures")

PERFECT_START = "2025-03-10T14:00:00.000Z"


def _write(path, data: bytes):
    with open(path, "wb") as fh:
        fh.write(data)
    print(f"  {os.path.relpath(path, ROOT)}  ({len(data)} bytes)")


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")
    print(f"  {os.path.relpath(path, ROOT)}")


def golden_pose():
    """One pose packet with formula-derived, float32-exact coordinates.

    Every value is a multiple of a negative power of two so the decoded
    floats compare exactly equal against the sidecar JSON in any
    language with IEEE-754 singles.
    """
    data = np.zeros((protocol.LANDMARK_COUNT, 4), dtype=np.float32)
    for i in range(protocol.LANDMARK_COUNT):
        data[i] = (0.25 + i / 128, 0.875 - i / 128, -0.25 + i / 256, (i % 8) / 8)
    frame = protocol.PoseFrame(seq=7, timestamp_us=233_333, data=data)
    packet = protocol.encode_pose(frame)
    _write(os.path.join(FIXTURES, "golden_pose_packet.bin"), packet)
    _write_json(
        os.path.join(FIXTURES, "golden_pose_packet.json"),
        {
            "seq": frame.seq,
            "timestamp_us": frame.timestamp_us,
            "landmarks": [[float(v) for v in row] for row in data],
        },
    )


def golden_feedback():
    fb = protocol.FeedbackState(
        seq=42,
        timestamp_us=1_400_000,
        phase=int(Phase.HOLDING_RIGHT),
        angle_deg=43.25,
        hold_progress=0.625,
        total_score=35,
        current_streak=3,
        rep_count=7,
        posture_flags=0,
        prompt_code=int(PromptCode.PERFECT_RIGHT),
        audio_cue=int(AudioCue.POSITIVE_CHIME),
    )
    packet = protocol.encode_feedback(fb)
    _write(os.path.join(FIXTURES, "golden_feedback_packet.bin"), packet)
    _write_json(
        os.path.join(FIXTURES, "golden_feedback_packet.json"),
        {
            "seq": fb.seq,
            "timestamp_us": fb.timestamp_us,
            "phase": fb.phase,
            "angle_deg": fb.angle_deg,
            "hold_progress": fb.hold_progress,
            "total_score": fb.total_score,
            "current_streak": fb.current_streak,
            "rep_count": fb.rep_count,
            "posture_flags": fb.posture_flags,
            "prompt_code": fb.prompt_code,
            "audio_cue": fb.audio_cue,
        },
    )


def _run_cli(*argv):
    buf = io.StringIO()
    with redirect_stdout(buf):
        rc = cli_main(list(argv))
    if rc != 0:
        raise SystemExit(f"fixture CLI step failed ({rc}): {argv}")


def perfect_recording():
    """5 clean reps plus the expected session log and feedback stream."""
    spec_path = os.path.join(FIXTURES, "perfect-5-reps.spec.json")
    _write_json(spec_path, {"reps": 5, "seed": 0})

    rec = os.path.join(FIXTURES, "perfect-5-reps.tshfrec")
    _run_cli("synth", spec_path, "--out", rec, "--start-time", PERFECT_START)
    print(f"  {os.path.relpath(rec, ROOT)}  ({os.path.getsize(rec)} bytes)")

    log_path = os.path.join(FIXTURES, "perfect-5-reps.session.json")
    fb_path = os.path.join(FIXTURES, "perfect-5-reps.feedback.bin")
    _run_cli("replay", rec, "--speed", "inf", "--out", log_path, "--feedback-out", fb_path)
    print(f"  {os.path.relpath(log_path, ROOT)}")
    print(f"  {os.path.relpath(fb_path, ROOT)}  ({os.path.getsize(fb_path)} bytes)")
    return log_path


def session_corpus(perfect_log_path):
    """A small sessions/ directory for the analyze command.

    Three contrasting runs: clean, lossy network, and a user who keeps
    over-rotating (no completed reps, only safety warnings).
    """
    sessions_dir = os.path.join(FIXTURES, "sessions")
    os.makedirs(sessions_dir, exist_ok=True)

    log = session.read_session(perfect_log_path)
    session.write_session(log, os.path.join(sessions_dir, session.session_filename(log)))
    print(f"  fixtures/sessions/{session.session_filename(log)}")

    _, records = recording.read_recording(os.path.join(FIXTURES, "perfect-5-reps.tshfrec"))
    impaired = recording.impair(
        records, recording.ImpairmentSpec(loss_rate=0.08, reorder_rate=0.05, seed=3)
    )
    start = datetime(2025, 3, 11, 9, 30, 0, tzinfo=timezone.utc)
    lossy_log, _, _ = replay_records(impaired, start_time=start, speed=float("inf"))
    session.write_session(
        lossy_log, os.path.join(sessions_dir, session.session_filename(lossy_log))
    )
    print(f"  fixtures/sessions/{session.session_filename(lossy_log)}")

    over = synth_packets(TrajectorySpec(amplitude_deg=70.0, reps=3, seed=1))
    start = datetime(2025, 3, 12, 16, 45, 0, tzinfo=timezone.utc)
    over_log, _, _ = replay_records(over, start_time=start, speed=float("inf"))
    session.write_session(
        over_log, os.path.join(sessions_dir, session.session_filename(over_log))
    )
    print(f"  fixtures/sessions/{session.session_filename(over_log)}")


# 20 usability scores, all reachable from integer item responses.
# mean 47.375, sample sd 7.047, min 27.5, max 60.0.
SUS_SCORES = [
    27.5, 40.0, 40.0, 42.5, 42.5, 45.0, 45.0, 45.0, 47.5, 47.5,
    47.5, 50.0, 50.0, 50.0, 52.5, 52.5, 52.5, 55.0, 55.0, 60.0,
]


def sus_cohort():
    rng = random.Random(2025)
    rows = []
    for n, target in enumerate(SUS_SCORES, 1):
        while True:  # rejection sampling; targets are mid-scale so this is quick
            items = [rng.randint(1, 5) for _ in range(10)]
            if sus_score(items) == target:
                break
        rows.append([f"P{n:02d}", *items])

    path = os.path.join(FIXTURES, "sus_cohort.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["participant"] + [f"Q{i}" for i in range(1, 11)])
        w.writerows(rows)
    print(f"  {os.path.relpath(path, ROOT)}")

    scores = np.array([sus_score(r[1:]) for r in rows])
    assert scores.tolist() == SUS_SCORES
    print(
        f"    scores: mean {scores.mean():.4f}  sd {scores.std(ddof=1):.4f}  "
        f"min {scores.min()}  max {scores.max()}"
    )


GEQ_MAP = {
    "Q1": "PositiveAffect", "Q2": "Competence", "Q3": "Flow", "Q4": "Immersion",
    "Q5": "NegativeAffect", "Q6": "Tension", "Q7": "Competence", "Q8": "Tension",
    "Q9": "PositiveAffect", "Q10": "Immersion", "Q11": "NegativeAffect",
    "Q12": "Flow", "Q13": "PositiveAffect", "Q14": "PositiveAffect",
}

# Column sums pinned by the published per-item means over 20 participants:
# Q1 94 (4.7), Q9 90 (4.5), Q13 99 (4.95).
PINNED_ITEMS = {"Q1": [5] * 14 + [4] * 6, "Q9": [5] * 10 + [4] * 10, "Q13": [5] * 19 + [4]}


def geq_cohort():
    rng = random.Random(7)
    n = 20
    columns = {}
    for item, values in PINNED_ITEMS.items():
        vals = list(values)
        rng.shuffle(vals)
        columns[item] = vals
    for item, dim in GEQ_MAP.items():
        if item in columns:
            continue
        if dim in ("NegativeAffect", "Tension"):
            columns[item] = [rng.choice([1, 1, 2, 2, 3]) for _ in range(n)]
        else:
            columns[item] = [rng.choice([3, 4, 4, 5, 5]) for _ in range(n)]

    path = os.path.join(FIXTURES, "geq_cohort.csv")
    items = sorted(GEQ_MAP, key=lambda s: (len(s), s))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["participant"] + items)
        for i in range(n):
            w.writerow([f"P{i + 1:02d}"] + [columns[item][i] for item in items])
    print(f"  {os.path.relpath(path, ROOT)}")
    for item in ("Q1", "Q9", "Q13"):
        print(f"    {item} mean {sum(columns[item]) / n}")

    map_path = os.path.join(FIXTURES, "geq_map.cfg")
    with open(map_path, "w", encoding="utf-8") as fh:
        fh.write("# game-experience item to dimension assignment for the pilot form\n")
        for item in items:
            fh.write(f"{item}={GEQ_MAP[item]}\n")
    print(f"  {os.path.relpath(map_path, ROOT)}")


def main():
    os.makedirs(FIXTURES, exist_ok=True)
    print("writing fixtures:")
    golden_pose()
    golden_feedback()
    log_path = perfect_recording()
    session_corpus(log_path)
    sus_cohort()
    geq_cohort()
    print("done")


if __name__ == "__main__":
    main()
