"""Service loopback: UDP frame path, raw and WebSocket bridge framings,
idle handling, crash-safe log flushing."""

import base64
import hashlib
import json
import os
import socket
import struct
import threading
import time

import pytest

from conftest import make_frame
from twistcoach import protocol
from twistcoach.config import EngineConfig
from twistcoach.service import EngineService, _ws_accept_key

US_30FPS = 33333


def free_port(kind=socket.SOCK_STREAM):
    s = socket.socket(socket.AF_INET, kind)
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]
    s.close()
    return port


def wait_until(pred, timeout=5.0, interval=0.02):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if pred():
            return True
        time.sleep(interval)
    return False


class Harness:
    def __init__(self, tmp_path, **cfg_overrides):
        self.feedback_rx = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.feedback_rx.bind(("127.0.0.1", 0))
        self.feedback_rx.settimeout(5.0)
        self.sessions_dir = str(tmp_path / "sessions")
        overrides = dict(
            listen_port=free_port(socket.SOCK_DGRAM),
            feedback_host="127.0.0.1",
            feedback_port=self.feedback_rx.getsockname()[1],
            bridge_port=free_port(),
            sessions_dir=self.sessions_dir,
        )
        overrides.update(cfg_overrides)
        self.cfg = EngineConfig(**overrides)
        self.service = EngineService(self.cfg)
        self.service.start()
        self.thread = threading.Thread(target=self.service.run_forever, daemon=True)
        self.thread.start()
        self.pose_tx = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)

    def send_pose(self, seq, t_us, **kwargs):
        pkt = protocol.encode_pose(make_frame(seq, t_us, **kwargs))
        self.pose_tx.sendto(pkt, ("127.0.0.1", self.cfg.listen_port))

    def session_files(self):
        if not os.path.isdir(self.sessions_dir):
            return []
        return sorted(os.listdir(self.sessions_dir))

    def shutdown(self):
        self.service.stop()
        self.thread.join(timeout=5.0)
        self.service.close()
        self.pose_tx.close()
        self.feedback_rx.close()


@pytest.fixture
def harness(tmp_path):
    h = Harness(tmp_path)
    yield h
    h.shutdown()


class RawClient:
    """Bridge client speaking the length-prefixed framing."""

    def __init__(self, port):
        self.sock = socket.create_connection(("127.0.0.1", port), timeout=5.0)
        self.decoder = protocol.FrameDecoder()
        self.messages = []

    def pump(self, want, timeout=5.0):
        return self.pump_until(lambda: len(self.messages) >= want, timeout)

    def pump_until(self, pred, timeout=5.0):
        deadline = time.monotonic() + timeout
        self.sock.settimeout(0.2)
        while not pred() and time.monotonic() < deadline:
            try:
                chunk = self.sock.recv(4096)
            except socket.timeout:
                continue
            if not chunk:
                break
            self.messages.extend(self.decoder.feed(chunk))
        return self.messages

    def jsons(self):
        return [json.loads(m) for m in self.messages if m.startswith(b"{")]

    def packets(self):
        return [m for m in self.messages if not m.startswith(b"{")]

    def send_control(self, obj):
        self.sock.sendall(protocol.frame_message(json.dumps(obj).encode()))

    def close(self):
        self.sock.close()


def test_udp_frame_path_and_feedback(harness):
    for i in range(5):
        harness.send_pose(i, i * US_30FPS, yaw_deg=25.0)
    data, _ = harness.feedback_rx.recvfrom(2048)
    fb = protocol.decode_feedback(data)
    assert fb.seq in range(5)
    assert wait_until(lambda: harness.service.engine.stats.frames_processed == 5)


def test_raw_bridge_hello_and_fanout(harness):
    client = RawClient(harness.cfg.bridge_port)
    client.pump(1)
    hello = client.jsons()[0]
    assert hello["protocol_version"] == protocol.PROTOCOL_VERSION
    assert hello["exercise"] == "seated"
    assert hello["config"]["safe_max_deg"] == 60.0

    for i in range(10):
        harness.send_pose(i, i * US_30FPS, yaw_deg=25.0)
    client.pump(6)
    pkts = client.packets()
    assert len(pkts) >= 5
    assert all(len(p) == protocol.FEEDBACK_PACKET_SIZE for p in pkts)
    fb = protocol.decode_feedback(pkts[0])
    assert fb.phase in range(8)
    client.close()


def test_raw_bridge_control_round_trip(harness):
    client = RawClient(harness.cfg.bridge_port)
    client.pump(1)
    for i in range(3):
        harness.send_pose(i, i * US_30FPS)
    wait_until(lambda: harness.service.engine.stats.frames_processed == 3)

    client.send_control({"cmd": "stats"})
    client.pump_until(lambda: any(m.get("cmd") == "stats" for m in client.jsons()))
    acks = [m for m in client.jsons() if m.get("cmd") == "stats"]
    assert acks and acks[0]["ok"]
    assert acks[0]["stats"]["frames_processed"] == 3

    client.send_control({"cmd": "stop"})
    client.pump_until(lambda: any(m.get("cmd") == "stop" for m in client.jsons()))
    stop_acks = [m for m in client.jsons() if m.get("cmd") == "stop"]
    assert stop_acks and stop_acks[0]["had_session"] is True
    assert stop_acks[0]["filename"].endswith(".json")
    # flusher persists the log
    assert wait_until(lambda: harness.session_files())
    assert harness.session_files()[0] == stop_acks[0]["filename"]
    client.close()


def test_control_rejects_garbage_and_unknown(harness):
    client = RawClient(harness.cfg.bridge_port)
    client.pump(1)
    client.sock.sendall(protocol.frame_message(b"not json"))
    client.send_control({"cmd": "dance"})
    client.pump_until(
        lambda: sum(1 for m in client.jsons() if not m.get("ok", True)) >= 2
    )
    errors = [m for m in client.jsons() if not m.get("ok", True)]
    assert any("bad control" in m.get("error", "") for m in errors)
    assert any("dance" in m.get("error", "") for m in errors)
    client.close()


def ws_client_frame(payload, opcode=0x1, mask=b"\x11\x22\x33\x44"):
    n = len(payload)
    head = bytes([0x80 | opcode])
    if n < 126:
        head += bytes([0x80 | n])
    else:
        head += bytes([0x80 | 126]) + struct.pack(">H", n)
    masked = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
    return head + mask + masked


class WsClient:
    def __init__(self, port):
        self.sock = socket.create_connection(("127.0.0.1", port), timeout=5.0)
        key = base64.b64encode(os.urandom(16)).decode()
        self.sock.sendall(
            (
                f"GET /feed HTTP/1.1\r\nHost: 127.0.0.1:{port}\r\n"
                "Upgrade: websocket\r\nConnection: Upgrade\r\n"
                f"Sec-WebSocket-Key: {key}\r\nSec-WebSocket-Version: 13\r\n\r\n"
            ).encode()
        )
        response = b""
        while b"\r\n\r\n" not in response:
            response += self.sock.recv(4096)
        assert b"101 Switching Protocols" in response
        expected = base64.b64encode(
            hashlib.sha1((key + "258EAFA5-E914-47DA-95CA-C5AB0DC85B11").encode()).digest()
        ).decode()
        assert f"Sec-WebSocket-Accept: {expected}".encode() in response
        self.frames = []  # (opcode, payload)

    def read_frame(self):
        head = self._exact(2)
        opcode = head[0] & 0x0F
        n = head[1] & 0x7F
        if n == 126:
            n = struct.unpack(">H", self._exact(2))[0]
        elif n == 127:
            n = struct.unpack(">Q", self._exact(8))[0]
        return opcode, self._exact(n)

    def _exact(self, n):
        buf = b""
        while len(buf) < n:
            chunk = self.sock.recv(n - len(buf))
            if not chunk:
                raise ConnectionError("eof")
            buf += chunk
        return buf

    def close(self):
        self.sock.close()


def test_websocket_bridge(harness):
    ws = WsClient(harness.cfg.bridge_port)
    ws.sock.settimeout(5.0)
    op, payload = ws.read_frame()
    assert op == 0x1  # hello arrives as text
    hello = json.loads(payload)
    assert hello["protocol_version"] == protocol.PROTOCOL_VERSION

    for i in range(5):
        harness.send_pose(i, i * US_30FPS, yaw_deg=25.0)
    op, payload = ws.read_frame()
    assert op == 0x2  # feedback packets are binary
    assert len(payload) == protocol.FEEDBACK_PACKET_SIZE
    protocol.decode_feedback(payload)

    # masked client text frame carries control JSON
    ws.sock.sendall(ws_client_frame(json.dumps({"cmd": "stats"}).encode()))
    for _ in range(100):
        op, payload = ws.read_frame()
        if op == 0x1 and b'"stats"' in payload:
            ack = json.loads(payload)
            break
    else:
        pytest.fail("no stats ack")
    assert ack["ok"] and ack["stats"]["frames_processed"] >= 1

    # ping is answered inline with a pong
    ws.sock.sendall(ws_client_frame(b"hi", opcode=0x9))
    for _ in range(100):
        op, payload = ws.read_frame()
        if op == 0xA:
            assert payload == b"hi"
            break
    else:
        pytest.fail("no pong")
    ws.close()


def test_ws_handshake_requires_key(harness):
    sock = socket.create_connection(("127.0.0.1", harness.cfg.bridge_port), timeout=5.0)
    sock.sendall(b"GET / HTTP/1.1\r\nHost: x\r\n\r\n")
    sock.settimeout(5.0)
    response = sock.recv(4096)
    assert b"400 Bad Request" in response
    sock.close()


def test_rfc6455_sample_accept_key():
    # published sample pair from the protocol RFC
    assert _ws_accept_key("dGhlIHNhbXBsZSBub25jZQ==") == "s3pPLMBiTxaQ9kYGzzhZRbK+xOo="


def test_idle_timeout_closes_session(tmp_path):
    h = Harness(tmp_path, idle_timeout_s=0.5)
    try:
        for i in range(3):
            h.send_pose(i, i * US_30FPS, yaw_deg=25.0)
        assert wait_until(lambda: h.service.engine.session_active)
        # nothing trackable anymore: the session must close by itself
        assert wait_until(lambda: not h.service.engine.session_active, timeout=5.0)
        assert wait_until(lambda: h.session_files())
    finally:
        h.shutdown()


def test_untrackable_frames_do_not_keep_session_alive(tmp_path):
    h = Harness(tmp_path, idle_timeout_s=0.5, dropout_limit_frames=5)
    try:
        h.send_pose(0, 0, yaw_deg=25.0)
        assert wait_until(lambda: h.service.engine.session_active)
        deadline = time.monotonic() + 4.0
        seq = 1
        closed = False
        while time.monotonic() < deadline:
            h.send_pose(seq, seq * US_30FPS, visibility=0.0)  # dropout frames
            seq += 1
            if not h.service.engine.session_active:
                closed = True
                break
            time.sleep(0.05)
        assert closed, "dropout-only traffic should not reset the idle clock"
    finally:
        h.shutdown()


def test_shutdown_flushes_open_session(tmp_path):
    h = Harness(tmp_path)
    for i in range(5):
        h.send_pose(i, i * US_30FPS, yaw_deg=25.0)
    wait_until(lambda: h.service.engine.stats.frames_processed == 5)
    h.shutdown()
    assert len(h.session_files()) == 1
    assert h.service.sessions_written == 1


def test_write_failure_preserves_partial(tmp_path, monkeypatch):
    import twistcoach.service as svc

    def boom(session, path):
        raise OSError("readonly fs")

    monkeypatch.setattr(svc, "write_session", boom)
    h = Harness(tmp_path)
    try:
        for i in range(5):
            h.send_pose(i, i * US_30FPS, yaw_deg=25.0)
        wait_until(lambda: h.service.engine.stats.frames_processed == 5)
    finally:
        h.shutdown()
    files = h.session_files()
    assert len(files) == 1
    assert files[0].endswith(".json.partial")
    with open(os.path.join(h.sessions_dir, files[0]), encoding="utf-8") as fh:
        data = json.load(fh)
    assert data["exercise"] == "seated"


def test_start_command_resets_session(harness):
    client = RawClient(harness.cfg.bridge_port)
    client.pump(1)
    for i in range(3):
        harness.send_pose(i, i * US_30FPS)
    wait_until(lambda: harness.service.engine.stats.frames_processed == 3)
    client.send_control({"cmd": "start"})
    client.pump_until(lambda: any(m.get("cmd") == "start" for m in client.jsons()))
    assert any(m.get("cmd") == "start" and m["ok"] for m in client.jsons())
    # the old session went to the flusher
    assert wait_until(lambda: harness.session_files())
    assert harness.service.engine.session_active
    client.close()
