"""Command line behaviour: exit codes, file outputs, JSON modes."""

import json
import os
import socket

import pytest

from twistcoach import protocol
from twistcoach.cli import main
from twistcoach.recording import read_header
from twistcoach.session import read_session


def run_cli(*argv):
    """Returns (exit_code,) capturing SystemExit from error paths."""
    try:
        return main(list(argv)) or 0
    except SystemExit as exc:
        return int(exc.code or 0)


@pytest.fixture(scope="module")
def recording_path(tmp_path_factory):
    d = tmp_path_factory.mktemp("rec")
    spec = d / "traj.json"
    spec.write_text(json.dumps({"reps": 5}), encoding="utf-8")
    out = d / "traj.tshfrec"
    code = run_cli(
        "synth", str(spec), "--out", str(out),
        "--start-time", "2025-03-10T14:00:00.000Z",
    )
    assert code == 0
    return str(out)


def test_usage_errors_exit_one(capsys):
    assert run_cli() == 1
    assert run_cli("no-such-command") == 1
    assert run_cli("replay") == 1  # missing positional
    assert run_cli("synth", "spec.json", "--bogus-flag") == 1
    err = capsys.readouterr().err
    assert "usage" in err


def test_synth_writes_recording(tmp_path, capsys):
    spec = tmp_path / "s.json"
    spec.write_text(json.dumps({"reps": 1, "amplitude_deg": 30.0}), encoding="utf-8")
    assert run_cli("synth", str(spec)) == 0
    out = tmp_path / "s.tshfrec"  # default: spec name, swapped extension
    assert out.exists()
    assert "packets" in capsys.readouterr().out
    header = read_header(str(out))
    assert header["meta"]["trajectory"]["amplitude_deg"] == 30.0
    assert "start_time" not in header["meta"]


def test_synth_stores_start_time(recording_path):
    header = read_header(recording_path)
    assert header["meta"]["start_time"] == "2025-03-10T14:00:00.000Z"


def test_synth_data_errors_exit_two(tmp_path, capsys):
    assert run_cli("synth", str(tmp_path / "missing.json")) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{]", encoding="utf-8")
    assert run_cli("synth", str(bad)) == 2
    bad.write_text(json.dumps({"fps": 999}), encoding="utf-8")
    assert run_cli("synth", str(bad)) == 2
    spec = tmp_path / "ok.json"
    spec.write_text("{}", encoding="utf-8")
    assert run_cli("synth", str(spec), "--start-time", "yesterday") == 2
    assert "error:" in capsys.readouterr().err


def test_replay_json_output(recording_path, capsys):
    assert run_cli("replay", recording_path, "--speed", "inf", "--json") == 0
    log = json.loads(capsys.readouterr().out)
    assert log["start_time"] == "2025-03-10T14:00:00.000Z"  # from metadata
    assert len(log["reps"]) == 5
    assert log["total_score"] == 75
    assert log["streaks"] == 5


def test_replay_human_summary(recording_path, capsys):
    assert run_cli("replay", recording_path, "--speed", "inf") == 0
    out = capsys.readouterr().out
    assert "811 packets -> 811 processed, 0 stale, 0 malformed" in out
    assert "reps 5, accuracy 100%, score 75" in out


def test_replay_writes_session_files(recording_path, tmp_path, capsys):
    out = tmp_path / "log.json"
    assert run_cli("replay", recording_path, "--speed", "inf", "--out", str(out)) == 0
    log = read_session(str(out))
    assert log.total_score == 75

    assert run_cli("replay", recording_path, "--speed", "inf",
                   "--sessions-dir", str(tmp_path / "sessions")) == 0
    names = os.listdir(tmp_path / "sessions")
    assert names == ["seated-20250310T140000000Z.json"]
    capsys.readouterr()


def test_replay_feedback_dump(recording_path, tmp_path):
    fb_path = tmp_path / "fb.bin"
    assert run_cli("replay", recording_path, "--speed", "inf",
                   "--feedback-out", str(fb_path)) == 0
    decoder = protocol.FrameDecoder()
    payloads = list(decoder.feed(fb_path.read_bytes()))
    assert len(payloads) == 811
    assert decoder.pending == 0
    assert all(len(p) == protocol.FEEDBACK_PACKET_SIZE for p in payloads)
    last = protocol.decode_feedback(payloads[-1])
    assert last.total_score == 75


def test_replay_deterministic_across_speeds(recording_path, tmp_path):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    assert run_cli("replay", recording_path, "--speed", "inf", "--out", str(a)) == 0
    assert run_cli("replay", recording_path, "--speed", "8", "--out", str(b)) == 0
    assert a.read_bytes() == b.read_bytes()


def test_replay_impaired_stream(recording_path, capsys):
    impair = json.dumps({"loss_rate": 0.05, "jitter_ms": 4.0, "seed": 3})
    assert run_cli("replay", recording_path, "--speed", "inf",
                   "--impair", impair, "--json") == 0
    log = json.loads(capsys.readouterr().out)
    assert len(log["reps"]) >= 4  # light impairment costs at most a rep


def test_replay_data_errors_exit_two(recording_path, tmp_path, capsys):
    assert run_cli("replay", str(tmp_path / "missing.tshfrec")) == 2
    assert run_cli("replay", recording_path, "--impair", "{oops") == 2
    assert run_cli("replay", recording_path, "--impair", '{"loss_rate": 2.0}') == 2
    assert run_cli("replay", recording_path, "--speed", "0") == 2
    truncated = tmp_path / "cut.tshfrec"
    blob = open(recording_path, "rb").read()
    truncated.write_bytes(blob[: len(blob) - 100])
    assert run_cli("replay", str(truncated), "--speed", "inf") == 2
    assert "error:" in capsys.readouterr().err


def test_analyze_table_and_json(recording_path, tmp_path, capsys):
    sessions = tmp_path / "sessions"
    assert run_cli("replay", recording_path, "--speed", "inf",
                   "--sessions-dir", str(sessions)) == 0
    capsys.readouterr()

    assert run_cli("analyze", str(sessions)) == 0
    out = capsys.readouterr().out
    assert "seated-20250310T140000000Z.json" in out
    assert "1 sessions, 5 reps" in out

    assert run_cli("analyze", str(sessions), "--json") == 0
    report = json.loads(capsys.readouterr().out)
    assert report["aggregate"]["total_reps"] == 5
    assert report["aggregate"]["mean_accuracy_pct"] == 100.0
    assert report["sessions"][0]["score"] == 75


def test_analyze_empty_dir(tmp_path, capsys):
    d = tmp_path / "empty"
    d.mkdir()
    assert run_cli("analyze", str(d)) == 0
    assert "no session logs" in capsys.readouterr().out
    assert run_cli("analyze", str(tmp_path / "missing")) == 2


def test_analyze_corrupt_session_exits_two(tmp_path, capsys):
    d = tmp_path / "sessions"
    d.mkdir()
    (d / "bad.json").write_text("{}", encoding="utf-8")
    assert run_cli("analyze", str(d)) == 2
    assert "error:" in capsys.readouterr().err


def test_analyze_questionnaires(tmp_path, capsys):
    d = tmp_path / "empty"
    d.mkdir()
    sus = tmp_path / "sus.csv"
    sus.write_text(
        "participant,Q1,Q2,Q3,Q4,Q5,Q6,Q7,Q8,Q9,Q10\n"
        "P1,3,3,3,3,3,3,3,3,3,3\n"
        "P2,5,1,5,1,5,1,5,1,5,1\n",
        encoding="utf-8",
    )
    geq = tmp_path / "geq.csv"
    geq.write_text("participant,Q1,Q2\nP1,4,2\nP2,5,1\n", encoding="utf-8")
    gmap = tmp_path / "map.cfg"
    gmap.write_text("Q1=PositiveAffect\nQ2=Tension\n", encoding="utf-8")

    assert run_cli("analyze", str(d), "--sus", str(sus), "--geq", str(geq),
                   "--map", str(gmap), "--json") == 0
    report = json.loads(capsys.readouterr().out)
    assert report["sus"]["n"] == 2
    assert report["sus"]["mean"] == 75.0  # (50 + 100) / 2
    assert report["geq"]["by_dimension"]["PositiveAffect"]["mean"] == 4.5
    assert report["geq"]["by_item"]["Q2"]["mean"] == 1.5

    # human-readable mode prints both summaries
    assert run_cli("analyze", str(d), "--sus", str(sus), "--geq", str(geq),
                   "--map", str(gmap)) == 0
    out = capsys.readouterr().out
    assert "SUS: n=2 mean=75.00" in out
    assert "PositiveAffect" in out


def test_analyze_geq_needs_map(tmp_path, capsys):
    d = tmp_path / "empty"
    d.mkdir()
    assert run_cli("analyze", str(d), "--geq", "whatever.csv") == 1
    assert "--geq requires --map" in capsys.readouterr().err


def test_protocol_dump_recording(recording_path, capsys):
    assert run_cli("protocol-dump", recording_path, "--max", "3") == 0
    lines = capsys.readouterr().out.strip().splitlines()
    header = json.loads(lines[0])
    assert header["format"] == "tshfrec"
    assert len(lines) == 5  # header + 3 rows + "... N more"
    assert "pose seq=0" in lines[1]
    assert "trackable=True" in lines[1]
    assert lines[-1].endswith("more")


def test_protocol_dump_single_packet(tmp_path, capsys):
    from conftest import make_frame

    pkt = tmp_path / "one.bin"
    pkt.write_bytes(protocol.encode_pose(make_frame(9, 123)))
    assert run_cli("protocol-dump", str(pkt)) == 0
    assert "pose seq=9" in capsys.readouterr().out


def test_protocol_dump_feedback_stream(recording_path, tmp_path, capsys):
    fb_path = tmp_path / "fb.bin"
    run_cli("replay", recording_path, "--speed", "inf", "--feedback-out", str(fb_path))
    capsys.readouterr()
    assert run_cli("protocol-dump", str(fb_path), "--max", "2") == 0
    out = capsys.readouterr().out
    assert "feedback seq=0" in out
    assert "score=" in out


def test_protocol_dump_trailing_garbage(recording_path, tmp_path, capsys):
    fb_path = tmp_path / "fb.bin"
    run_cli("replay", recording_path, "--speed", "inf", "--feedback-out", str(fb_path))
    capsys.readouterr()
    with open(fb_path, "ab") as fh:
        fh.write(b"\x05\x00\x00\x00xx")  # frame promises 5 bytes, delivers 2
    assert run_cli("protocol-dump", str(fb_path), "--max", "2000") == 2
    assert "trailing bytes" in capsys.readouterr().err


def test_serve_bind_failure_exits_two(tmp_path, capsys):
    blocker = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    blocker.bind(("127.0.0.1", 0))
    port = blocker.getsockname()[1]
    try:
        code = run_cli("serve", "--listen", str(port),
                       "--sessions-dir", str(tmp_path))
    finally:
        blocker.close()
    assert code == 2
    assert "cannot bind" in capsys.readouterr().err
