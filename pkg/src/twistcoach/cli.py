"""Command line front end.

Exit codes: 0 success, 1 usage error, 2 data error (unreadable or
invalid input files, bind failures, corrupt recordings).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import signal
import sys

from . import protocol, recording, session
from .config import ConfigError, load_config
from .engine import REPLAY_EPOCH, replay_records
from .questionnaires import (
    geq_summary,
    load_geq_csv,
    load_geq_map,
    load_sus_csv,
    sus_score,
    sus_summary,
)
from .synth import TrajectorySpec, packets as synth_packets


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; our contract reserves 2 for data errors
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _die(message: str, code: int = 2) -> "SystemExit":
    print(f"error: {message}", file=sys.stderr)
    return SystemExit(code)


def _build_parser() -> _Parser:
    p = _Parser(prog="twistcoach", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    serve = sub.add_parser("serve", help="run the live engine service")
    serve.add_argument("--config", help="JSON config file")
    serve.add_argument("--listen", type=int, dest="listen_port", help="pose datagram port")
    serve.add_argument("--feedback-host", dest="feedback_host")
    serve.add_argument("--feedback-port", type=int, dest="feedback_port")
    serve.add_argument("--bridge-port", type=int, dest="bridge_port")
    serve.add_argument("--sessions-dir", dest="sessions_dir")
    serve.add_argument("--prompts", dest="prompts_file", help="prompt text table")
    serve.add_argument("--log-level", dest="log_level", choices=["debug", "info", "warning", "error"])

    replay = sub.add_parser("replay", help="run a recorded pose stream through the engine")
    replay.add_argument("recording", help="*.tshfrec file")
    replay.add_argument("--speed", type=float, default=1.0, help="replay speed multiplier; inf = no pacing")
    replay.add_argument("--config", help="JSON config file")
    replay.add_argument("--out", help="write the session log to this exact path")
    replay.add_argument("--sessions-dir", help="write the session log into this directory")
    replay.add_argument("--feedback-out", help="dump emitted feedback packets, length-prefixed")
    replay.add_argument("--impair", help='impairment JSON, e.g. \'{"loss_rate":0.1,"seed":7}\'')
    replay.add_argument("--json", action="store_true", help="print the session log JSON to stdout")

    synth = sub.add_parser("synth", help="generate a synthetic pose recording")
    synth.add_argument("spec", help="trajectory spec JSON file")
    synth.add_argument("--out", help="output *.tshfrec path (default: spec name with .tshfrec)")
    synth.add_argument("--start-time", help="ISO-8601 session start stored in recording metadata")

    analyze = sub.add_parser("analyze", help="summarize session logs and questionnaires")
    analyze.add_argument("sessions", help="directory of session log JSON files")
    analyze.add_argument("--sus", help="SUS responses CSV")
    analyze.add_argument("--geq", help="game-experience responses CSV")
    analyze.add_argument("--map", dest="geq_map", help="item-to-dimension map for --geq")
    analyze.add_argument("--json", action="store_true", help="emit machine-readable JSON instead of tables")

    dump = sub.add_parser("protocol-dump", help="decode a packet file for inspection")
    dump.add_argument("file", help="*.tshfrec, raw packet, or length-prefixed packet stream")
    dump.add_argument("--max", type=int, default=20, help="maximum packets to print (default 20)")
    return p


# -- serve ------------------------------------------------------------------


def _cmd_serve(args) -> int:
    overrides = {
        k: getattr(args, k)
        for k in ("listen_port", "feedback_host", "feedback_port", "bridge_port",
                  "sessions_dir", "prompts_file", "log_level")
    }
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        raise _die(str(exc))
    logging.basicConfig(
        stream=sys.stderr,
        level=getattr(logging, cfg.log_level.upper()),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    from .service import EngineService

    service = EngineService(cfg)
    try:
        service.start()
    except RuntimeError as exc:
        raise _die(str(exc))
    signal.signal(signal.SIGINT, lambda *_: service.stop())
    signal.signal(signal.SIGTERM, lambda *_: service.stop())
    try:
        service.run_forever()
    finally:
        service.close()
    return 0


# -- replay -----------------------------------------------------------------


def _cmd_replay(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        raise _die(str(exc))
    try:
        header, records = recording.read_recording(args.recording)
    except (OSError, recording.RecordingError) as exc:
        raise _die(str(exc))

    if args.impair:
        try:
            spec = recording.ImpairmentSpec(**json.loads(args.impair))
        except (ValueError, TypeError) as exc:
            raise _die(f"bad --impair: {exc}")
        records = recording.impair(records, spec)

    start = REPLAY_EPOCH
    meta_start = header.get("meta", {}).get("start_time")
    if meta_start:
        try:
            start = session._parse_time(meta_start)
        except ValueError as exc:
            raise _die(f"bad start_time in recording metadata: {exc}")

    if not args.speed > 0:
        raise _die(f"--speed must be positive, got {args.speed}")
    sleep_fn = None if math.isfinite(args.speed) else (lambda _s: None)
    log, results, engine = replay_records(
        records, config=cfg, start_time=start, speed=args.speed, sleep_fn=sleep_fn
    )

    if args.feedback_out:
        try:
            with open(args.feedback_out, "wb") as fh:
                for r in results:
                    fh.write(protocol.frame_message(r.feedback_bytes))
        except OSError as exc:
            raise _die(f"cannot write {args.feedback_out}: {exc}")

    out_path = args.out
    if out_path is None and args.sessions_dir:
        out_path = os.path.join(args.sessions_dir, session.session_filename(log))
    if out_path:
        try:
            session.write_session(log, out_path)
        except (OSError, session.SessionLogError) as exc:
            raise _die(str(exc))

    if args.json:
        json.dump(session.to_json_dict(log), sys.stdout, indent=2)
        print()
    else:
        acc = session.session_accuracy(log)
        acc_text = "n/a" if acc is None else f"{acc:.0f}%"
        stats = engine.stats
        print(
            f"{len(records)} packets -> {stats.frames_processed} processed, "
            f"{stats.frames_dropped_stale} stale, {stats.frames_malformed} malformed"
        )
        print(
            f"reps {len(log.reps)}, accuracy {acc_text}, score {log.total_score}, "
            f"best streak {log.streaks}"
        )
        if out_path:
            print(f"session log: {out_path}")
    return 0


# -- synth --------------------------------------------------------------------


def _cmd_synth(args) -> int:
    try:
        spec = TrajectorySpec.from_json_file(args.spec)
    except (OSError, ValueError) as exc:
        raise _die(str(exc))
    out = args.out
    if out is None:
        base, _ = os.path.splitext(args.spec)
        out = base + ".tshfrec"
    meta = {"trajectory": json.loads(json.dumps(spec.__dict__, default=list))}
    if args.start_time:
        try:
            session._parse_time(args.start_time)
        except ValueError as exc:
            raise _die(f"bad --start-time: {exc}")
        meta["start_time"] = args.start_time
    try:
        count = recording.write_recording(out, synth_packets(spec), meta)
    except OSError as exc:
        raise _die(f"cannot write {out}: {exc}")
    print(f"{out}: {count} packets, {spec.duration_s:.1f}s at {spec.fps} FPS")
    return 0


# -- analyze ------------------------------------------------------------------


def _fmt_cell(value, width: int) -> str:
    return f"{value:>{width}}"


def _cmd_analyze(args) -> int:
    if args.geq and not args.geq_map:
        raise _die("--geq requires --map", code=1)
    try:
        names = sorted(n for n in os.listdir(args.sessions) if n.endswith(".json"))
    except OSError as exc:
        raise _die(f"cannot list {args.sessions}: {exc}")

    rows = []
    for name in names:
        path = os.path.join(args.sessions, name)
        try:
            log = session.read_session(path)
        except (OSError, session.SessionLogError) as exc:
            raise _die(str(exc))
        acc = session.session_accuracy(log)
        duration = (log.end_time - log.start_time).total_seconds()
        rows.append(
            {
                "file": name,
                "exercise": log.exercise,
                "reps": len(log.reps),
                "correct": sum(1 for r in log.reps if r.correct),
                "excellent": sum(1 for r in log.reps if r.excellent),
                "accuracy_pct": acc,
                "score": log.total_score,
                "best_streak": log.streaks,
                "duration_s": duration,
            }
        )

    report: dict = {"sessions": rows}
    with_reps = [r for r in rows if r["accuracy_pct"] is not None]
    report["aggregate"] = {
        "sessions": len(rows),
        "total_reps": sum(r["reps"] for r in rows),
        "total_score": sum(r["score"] for r in rows),
        "mean_accuracy_pct": (
            sum(r["accuracy_pct"] for r in with_reps) / len(with_reps) if with_reps else None
        ),
    }

    if args.sus:
        try:
            responses = load_sus_csv(args.sus)
            scores = [sus_score(items) for _, items in responses]
        except (OSError, ValueError) as exc:
            raise _die(str(exc))
        report["sus"] = sus_summary(scores)
    if args.geq:
        try:
            item_map = load_geq_map(args.geq_map)
            geq_rows = load_geq_csv(args.geq, item_map)
        except (OSError, ValueError) as exc:
            raise _die(str(exc))
        by_dimension, by_item = geq_summary([resp for _, resp in geq_rows], item_map)
        report["geq"] = {"by_dimension": by_dimension, "by_item": by_item}

    if args.json:
        json.dump(report, sys.stdout, indent=2)
        print()
        return 0

    if rows:
        headers = ("session", "reps", "correct", "acc%", "score", "streak", "dur s")
        widths = [max(len(headers[0]), max(len(r["file"]) for r in rows)), 5, 7, 6, 6, 6, 7]
        line = "  ".join(_fmt_cell(h, w) for h, w in zip(headers, widths))
        print(line)
        print("-" * len(line))
        for r in rows:
            acc = "n/a" if r["accuracy_pct"] is None else f"{r['accuracy_pct']:.0f}"
            cells = (
                r["file"], r["reps"], r["correct"], acc, r["score"], r["best_streak"],
                f"{r['duration_s']:.0f}",
            )
            print("  ".join(_fmt_cell(c, w) for c, w in zip(cells, widths)))
        agg = report["aggregate"]
        mean_acc = agg["mean_accuracy_pct"]
        print(
            f"\n{agg['sessions']} sessions, {agg['total_reps']} reps, "
            f"mean accuracy {'n/a' if mean_acc is None else f'{mean_acc:.1f}%'}, "
            f"total score {agg['total_score']}"
        )
    else:
        print(f"no session logs in {args.sessions}")

    if "sus" in report:
        s = report["sus"]
        print(
            f"\nSUS: n={s['n']} mean={s['mean']:.2f} sd={s['sd']:.2f} "
            f"min={s['min']:.1f} max={s['max']:.1f}"
        )
    if "geq" in report:
        print("\nGame experience by dimension:")
        for dim, stats in report["geq"]["by_dimension"].items():
            print(f"  {dim:<16} mean={stats['mean']:.2f} sd={stats['sd']:.2f}")
    return 0


# -- protocol-dump ---------------------------------------------------------------


def _describe_packet(data: bytes) -> str:
    kind = protocol.packet_kind(data)
    if kind == protocol.KIND_POSE:
        frame = protocol.decode_pose(data)
        vis = frame.visibility
        return (
            f"pose seq={frame.seq} ts={frame.timestamp_us}us "
            f"trackable={frame.is_trackable()} vis_min={vis.min():.2f}"
        )
    fb = protocol.decode_feedback(data)
    return (
        f"feedback seq={fb.seq} ts={fb.timestamp_us}us phase={fb.phase} "
        f"angle={fb.angle_deg:.1f} hold={fb.hold_progress:.2f} score={fb.total_score} "
        f"streak={fb.current_streak} reps={fb.rep_count} flags={fb.posture_flags:#04x} "
        f"prompt={fb.prompt_code} audio={fb.audio_cue}"
    )


def _cmd_protocol_dump(args) -> int:
    path = args.file
    try:
        if path.endswith(".tshfrec"):
            header, records = recording.read_recording(path)
            print(json.dumps(header))
            t_us = 0
            for i, (delta, packet) in enumerate(records):
                if i >= args.max:
                    print(f"... {len(records) - args.max} more")
                    break
                t_us += delta
                print(f"{t_us / 1e6:10.4f}s  {_describe_packet(packet)}")
            return 0
        with open(path, "rb") as fh:
            blob = fh.read()
        if len(blob) in (protocol.POSE_PACKET_SIZE, protocol.FEEDBACK_PACKET_SIZE):
            print(_describe_packet(blob))
            return 0
        decoder = protocol.FrameDecoder()
        shown = 0
        for payload in decoder.feed(blob):
            if shown >= args.max:
                print("...")
                break
            print(_describe_packet(payload))
            shown += 1
        if decoder.pending:
            raise _die(f"{path}: {decoder.pending} trailing bytes do not form a frame")
        if shown == 0:
            raise _die(f"{path}: no packets found")
        return 0
    except (OSError, protocol.ProtocolError, recording.RecordingError) as exc:
        raise _die(str(exc))


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "serve": _cmd_serve,
        "replay": _cmd_replay,
        "synth": _cmd_synth,
        "analyze": _cmd_analyze,
        "protocol-dump": _cmd_protocol_dump,
    }
    try:
        return handlers[args.command](args)
    except SystemExit:
        raise
    except BrokenPipeError:
        return 0


if __name__ == "__main__":
    sys.exit(main())
