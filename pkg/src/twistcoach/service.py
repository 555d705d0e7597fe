"""Long-running engine service.

One UDP receive loop owns the frame path: datagram in, pipeline, one
feedback datagram out to the display address plus a fan-out copy to
every connected bridge client. Session logs are written by a separate
flusher thread so disk stalls never block the frame path.

The bridge port speaks two framings over the same TCP listener. A
client that opens with an HTTP upgrade request gets RFC 6455 WebSocket
service (binary frames carry feedback packets, text frames carry JSON);
anything else is treated as the raw framing, u32 little-endian length
prefixes in both directions. The first message on either framing is a
JSON hello: {"protocol_version", "exercise", "config"}. Clients may
send JSON control messages {"cmd": "start"|"stop"|"stats"}; each gets a
JSON ack.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import os
import queue
import socket
import struct
import threading
import time
from collections import deque
from datetime import datetime, timezone

from . import protocol
from .config import EngineConfig, config_snapshot
from .engine import FrameEngine
from .kernels import STATUS_OK
from .scoring import load_prompt_table
from .session import SessionLog, session_filename, to_json_dict, write_session

log = logging.getLogger("twistcoach.service")

_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"
_RECV_TIMEOUT_S = 0.25
_CLIENT_QUEUE_MAX = 256  # outbound frames buffered per bridge client


def _ws_accept_key(key: str) -> str:
    digest = hashlib.sha1((key + _WS_GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


def _ws_frame(payload: bytes, opcode: int) -> bytes:
    n = len(payload)
    head = bytes([0x80 | opcode])
    if n < 126:
        head += bytes([n])
    elif n < 1 << 16:
        head += bytes([126]) + struct.pack(">H", n)
    else:
        head += bytes([127]) + struct.pack(">Q", n)
    return head + payload


def _read_exact(sock: socket.socket, n: int) -> bytes | None:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return None
        buf += chunk
    return buf


def _ws_read_message(sock: socket.socket) -> tuple[int, bytes] | None:
    """One complete (possibly fragmented) message; None on EOF/close."""
    opcode = None
    payload = b""
    while True:
        head = _read_exact(sock, 2)
        if head is None:
            return None
        fin = head[0] & 0x80
        op = head[0] & 0x0F
        masked = head[1] & 0x80
        n = head[1] & 0x7F
        if n == 126:
            ext = _read_exact(sock, 2)
            if ext is None:
                return None
            n = struct.unpack(">H", ext)[0]
        elif n == 127:
            ext = _read_exact(sock, 8)
            if ext is None:
                return None
            n = struct.unpack(">Q", ext)[0]
        mask = b""
        if masked:
            mask = _read_exact(sock, 4) or b""
            if len(mask) < 4:
                return None
        data = _read_exact(sock, n) if n else b""
        if data is None:
            return None
        if masked:
            data = bytes(b ^ mask[i % 4] for i, b in enumerate(data))
        if op == 0x8:  # close
            return (0x8, data)
        if op == 0x9:  # ping -> answer inline, keep reading
            try:
                sock.sendall(_ws_frame(data, 0xA))
            except OSError:
                return None
            continue
        if op == 0xA:  # pong
            continue
        if opcode is None:
            opcode = op
        payload += data
        if fin:
            return (opcode or 0x2, payload)


class _BridgeClient:
    """One connected UI; a private sender thread drains its queue."""

    def __init__(self, sock: socket.socket, addr, websocket: bool):
        self.sock = sock
        self.addr = addr
        self.websocket = websocket
        self.alive = True
        self._q: deque[tuple[bytes, bool]] = deque(maxlen=_CLIENT_QUEUE_MAX)
        self._cv = threading.Condition()

    def enqueue(self, payload: bytes, text: bool = False) -> None:
        with self._cv:
            self._q.append((payload, text))  # deque drops oldest when full
            self._cv.notify()

    def sender_loop(self) -> None:
        try:
            while True:
                with self._cv:
                    while not self._q and self.alive:
                        self._cv.wait(timeout=1.0)
                    if not self.alive and not self._q:
                        return
                    payload, text = self._q.popleft()
                if self.websocket:
                    self.sock.sendall(_ws_frame(payload, 0x1 if text else 0x2))
                else:
                    self.sock.sendall(protocol.frame_message(payload))
        except OSError:
            pass
        finally:
            self.alive = False

    def close(self) -> None:
        self.alive = False
        with self._cv:
            self._cv.notify()
        try:
            self.sock.close()
        except OSError:
            pass


class EngineService:
    """Composition root wiring sockets to a FrameEngine.

    Thread layout: main receive loop (frame path), bridge accept thread,
    two threads per bridge client (reader for control, sender for
    feedback), one log flusher. The engine itself is single-threaded;
    control commands take the same lock as the frame path.
    """

    def __init__(self, cfg: EngineConfig | None = None):
        self.cfg = cfg or EngineConfig()
        prompts = None
        if self.cfg.prompts_file:
            prompts = load_prompt_table(self.cfg.prompts_file)
        self.engine = FrameEngine(self.cfg, prompts=prompts)
        self._engine_lock = threading.Lock()
        self._clients: list[_BridgeClient] = []
        self._clients_lock = threading.Lock()
        self._log_queue: queue.Queue[SessionLog | None] = queue.Queue()
        self._stop = threading.Event()
        self._last_trackable = time.monotonic()
        self._pose_sock: socket.socket | None = None
        self._feedback_sock: socket.socket | None = None
        self._bridge_sock: socket.socket | None = None
        self._threads: list[threading.Thread] = []
        self.sessions_written = 0

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> None:
        cfg = self.cfg
        try:
            self._pose_sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
            self._pose_sock.setsockopt(socket.SOL_SOCKET, socket.SO_RCVBUF, 1 << 20)
            self._pose_sock.bind(("0.0.0.0", cfg.listen_port))
            self._pose_sock.settimeout(_RECV_TIMEOUT_S)
            self._feedback_sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
            self._bridge_sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
            self._bridge_sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            self._bridge_sock.bind(("0.0.0.0", cfg.bridge_port))
            self._bridge_sock.listen(8)
            self._bridge_sock.settimeout(_RECV_TIMEOUT_S)
        except OSError as exc:
            self.close()
            raise RuntimeError(f"cannot bind service ports: {exc}") from exc

        accept = threading.Thread(target=self._accept_loop, name="bridge-accept", daemon=True)
        flusher = threading.Thread(target=self._flush_loop, name="log-flusher", daemon=True)
        accept.start()
        flusher.start()
        self._threads += [accept, flusher]
        log.info(
            "listening: pose udp/%d, feedback to %s:%d, bridge tcp/%d",
            cfg.listen_port, cfg.feedback_host, cfg.feedback_port, cfg.bridge_port,
        )

    def run_forever(self) -> None:
        assert self._pose_sock is not None
        while not self._stop.is_set():
            try:
                data, _addr = self._pose_sock.recvfrom(2048)
            except socket.timeout:
                self._check_idle()
                continue
            except OSError:
                break
            self._handle_datagram(data)
            self._check_idle()
        # drain: close any open session on the way out
        self._end_session("shutdown")
        self._log_queue.put(None)
        for t in self._threads:
            t.join(timeout=2.0)
        log.info("stats: %s", json.dumps(self.engine.stats.summary()))

    def stop(self) -> None:
        self._stop.set()

    def close(self) -> None:
        self.stop()
        for s in (self._pose_sock, self._feedback_sock, self._bridge_sock):
            if s is not None:
                try:
                    s.close()
                except OSError:
                    pass
        with self._clients_lock:
            clients = list(self._clients)
        for c in clients:
            c.close()

    # -- frame path ----------------------------------------------------------

    def _handle_datagram(self, data: bytes) -> None:
        with self._engine_lock:
            result = self.engine.process_datagram(data)
        if result is None:
            return
        if result.condition_status == STATUS_OK:
            self._last_trackable = time.monotonic()
        assert self._feedback_sock is not None
        try:
            self._feedback_sock.sendto(
                result.feedback_bytes, (self.cfg.feedback_host, self.cfg.feedback_port)
            )
        except OSError as exc:
            log.warning("feedback send failed: %s", exc)
        self._broadcast(result.feedback_bytes)

    def _broadcast(self, payload: bytes, text: bool = False) -> None:
        with self._clients_lock:
            dead = [c for c in self._clients if not c.alive]
            for c in dead:
                self._clients.remove(c)
                c.close()
            for c in self._clients:
                c.enqueue(payload, text)

    def _check_idle(self) -> None:
        if not self.engine.session_active:
            return
        if time.monotonic() - self._last_trackable > self.cfg.idle_timeout_s:
            self._end_session("idle timeout")

    def _end_session(self, why: str) -> SessionLog | None:
        with self._engine_lock:
            session = self.engine.end_session()
        if session is not None:
            log.info("session closed (%s): %d reps, score %d", why, len(session.reps), session.total_score)
            self._log_queue.put(session)
        return session

    # -- log flusher -----------------------------------------------------------

    def _flush_loop(self) -> None:
        while True:
            session = self._log_queue.get()
            if session is None:
                return
            path = os.path.join(self.cfg.sessions_dir, session_filename(session))
            try:
                write_session(session, path)
                self.sessions_written += 1
                log.info("session log written: %s", path)
            except Exception as exc:
                # keep the data: park raw JSON next to where the log should be
                partial = path + ".partial"
                log.error("session write failed (%s); preserving %s", exc, partial)
                try:
                    os.makedirs(self.cfg.sessions_dir, exist_ok=True)
                    with open(partial, "w", encoding="utf-8") as fh:
                        json.dump(to_json_dict(session), fh)
                    self.sessions_written += 1
                except OSError as exc2:
                    log.critical("could not preserve session: %s", exc2)

    # -- bridge ---------------------------------------------------------------

    def _accept_loop(self) -> None:
        assert self._bridge_sock is not None
        while not self._stop.is_set():
            try:
                sock, addr = self._bridge_sock.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            t = threading.Thread(
                target=self._serve_client, args=(sock, addr), name=f"bridge-{addr[1]}", daemon=True
            )
            t.start()

    def _hello(self) -> bytes:
        return json.dumps(
            {
                "protocol_version": protocol.PROTOCOL_VERSION,
                "exercise": self.cfg.exercise_name,
                "config": config_snapshot(self.cfg),
            }
        ).encode("utf-8")

    def _serve_client(self, sock: socket.socket, addr) -> None:
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        # sniff the framing: WebSocket clients open with an HTTP request
        # right away; a raw client may say nothing at all, so a silent
        # first second means raw
        websocket = False
        deadline = time.monotonic() + 1.0
        try:
            while True:
                sock.settimeout(max(0.05, deadline - time.monotonic()))
                try:
                    first = sock.recv(4, socket.MSG_PEEK)
                except socket.timeout:
                    break
                if not first:
                    break
                if len(first) >= 4 or not b"GET ".startswith(first):
                    websocket = first.startswith(b"GET ")
                    break
                if time.monotonic() >= deadline:
                    break
        except OSError:
            sock.close()
            return
        finally:
            try:
                sock.settimeout(None)
            except OSError:
                pass
        if websocket and not self._ws_handshake(sock):
            sock.close()
            return
        client = _BridgeClient(sock, addr, websocket)
        client.enqueue(self._hello(), text=True)
        with self._clients_lock:
            self._clients.append(client)
        sender = threading.Thread(target=client.sender_loop, name=f"bridge-send-{addr[1]}", daemon=True)
        sender.start()
        log.info("bridge client %s connected (%s)", addr, "websocket" if websocket else "raw")
        try:
            self._client_reader(client)
        finally:
            client.close()
            with self._clients_lock:
                if client in self._clients:
                    self._clients.remove(client)
            log.info("bridge client %s disconnected", addr)

    def _ws_handshake(self, sock: socket.socket) -> bool:
        sock.settimeout(5.0)
        try:
            request = b""
            while b"\r\n\r\n" not in request:
                chunk = sock.recv(4096)
                if not chunk or len(request) > 1 << 16:
                    return False
                request += chunk
        except OSError:
            return False
        finally:
            sock.settimeout(None)
        headers = {}
        for line in request.split(b"\r\n")[1:]:
            if b":" in line:
                k, v = line.split(b":", 1)
                headers[k.strip().lower()] = v.strip()
        key = headers.get(b"sec-websocket-key")
        if key is None or b"websocket" not in headers.get(b"upgrade", b"").lower():
            sock.sendall(b"HTTP/1.1 400 Bad Request\r\n\r\n")
            return False
        accept = _ws_accept_key(key.decode("ascii"))
        sock.sendall(
            (
                "HTTP/1.1 101 Switching Protocols\r\n"
                "Upgrade: websocket\r\n"
                "Connection: Upgrade\r\n"
                f"Sec-WebSocket-Accept: {accept}\r\n\r\n"
            ).encode("ascii")
        )
        return True

    def _client_reader(self, client: _BridgeClient) -> None:
        if client.websocket:
            while client.alive:
                msg = _ws_read_message(client.sock)
                if msg is None or msg[0] == 0x8:
                    return
                opcode, payload = msg
                if opcode == 0x1:
                    self._handle_control(client, payload)
        else:
            decoder = protocol.FrameDecoder()
            while client.alive:
                try:
                    chunk = client.sock.recv(4096)
                except OSError:
                    return
                if not chunk:
                    return
                try:
                    for payload in decoder.feed(chunk):
                        self._handle_control(client, payload)
                except protocol.ProtocolError:
                    return

    def _handle_control(self, client: _BridgeClient, payload: bytes) -> None:
        try:
            msg = json.loads(payload.decode("utf-8"))
            cmd = msg.get("cmd")
        except (ValueError, AttributeError):
            client.enqueue(json.dumps({"ok": False, "error": "bad control message"}).encode(), text=True)
            return
        if cmd == "start":
            self._end_session("restart command")
            with self._engine_lock:
                self.engine.start_session(datetime.now(timezone.utc))
            self._last_trackable = time.monotonic()
            client.enqueue(json.dumps({"ok": True, "cmd": "start"}).encode(), text=True)
        elif cmd == "stop":
            session = self._end_session("stop command")
            reply = {"ok": True, "cmd": "stop", "had_session": session is not None}
            if session is not None:
                reply["filename"] = session_filename(session)
            client.enqueue(json.dumps(reply).encode(), text=True)
        elif cmd == "stats":
            client.enqueue(
                json.dumps({"ok": True, "cmd": "stats", "stats": self.engine.stats.summary()}).encode(),
                text=True,
            )
        else:
            client.enqueue(json.dumps({"ok": False, "error": f"unknown cmd {cmd!r}"}).encode(), text=True)


def run(cfg: EngineConfig | None = None) -> EngineService:
    """Start a service and block until stopped."""
    service = EngineService(cfg)
    service.start()
    try:
        service.run_forever()
    finally:
        service.close()
    return service
