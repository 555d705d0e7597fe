"""Binary wire protocol for pose and feedback packets.

All integers little-endian. Layouts are fixed-size so a packet always
fits one datagram and decoding never needs lookahead:

PosePacket, 546 bytes:
    offset 0   magic     4 bytes "TSHF"
    offset 4   version   u8 = 1
    offset 5   kind      u8 = 0x01
    offset 6   seq       u32
    offset 10  timestamp u64 microseconds
    offset 18  landmarks 33 x (x f32, y f32, z f32, visibility f32)

FeedbackPacket, 41 bytes:
    offset 0   magic     4 bytes "TSHF"
    offset 4   version   u8 = 1
    offset 5   kind      u8 = 0x02
    offset 6   seq       u32 (mirrors the pose packet that produced it)
    offset 10  timestamp u64 microseconds
    offset 18  phase     u8
    offset 19  angle     f32 signed degrees
    offset 23  hold      f32 progress in [0, 1]
    offset 27  score     i32
    offset 31  streak    u16
    offset 33  reps      u16
    offset 35  flags     u8 (bit0 NotSeated, bit1 Misaligned,
                             bit2 OverRotated, bit3 Dropout)
    offset 36  prompt    u16 code
    offset 38  audio     u8 cue
    offset 39  reserved  2 bytes, zero

The stream bridge reuses FeedbackPacket bytes behind a u32
length-prefix framing so one codec serves both transports.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .landmarks import LANDMARK_COUNT, PoseFrame

MAGIC = b"TSHF"
PROTOCOL_VERSION = 1
KIND_POSE = 0x01
KIND_FEEDBACK = 0x02

POSE_PACKET_SIZE = 546
FEEDBACK_PACKET_SIZE = 41

FLAG_NOT_SEATED = 0x01
FLAG_MISALIGNED = 0x02
FLAG_OVER_ROTATED = 0x04
FLAG_DROPOUT = 0x08

DEFAULT_LISTEN_PORT = 9750
DEFAULT_FEEDBACK_PORT = 9751
DEFAULT_BRIDGE_PORT = 9752

_HEADER = struct.Struct("<4sBBIQ")  # magic, version, kind, seq, timestamp_us
_FEEDBACK_BODY = struct.Struct("<BffiHHBHB2s")

assert _HEADER.size == 18
assert _HEADER.size + LANDMARK_COUNT * 16 == POSE_PACKET_SIZE
assert _HEADER.size + _FEEDBACK_BODY.size == FEEDBACK_PACKET_SIZE


class ProtocolError(ValueError):
    pass


class BadMagic(ProtocolError):
    pass


class BadVersion(ProtocolError):
    pass


class BadKind(ProtocolError):
    pass


class BadLength(ProtocolError):
    pass


@dataclass
class FeedbackState:
    """Decoded FeedbackPacket contents."""

    seq: int
    timestamp_us: int
    phase: int
    angle_deg: float
    hold_progress: float
    total_score: int
    current_streak: int
    rep_count: int
    posture_flags: int
    prompt_code: int
    audio_cue: int


def _check_header(data: bytes, expected_kind: int, expected_size: int) -> tuple[int, int]:
    if len(data) < _HEADER.size:
        raise BadLength(f"packet too short for header: {len(data)} bytes")
    magic, version, kind, seq, ts = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if version != PROTOCOL_VERSION:
        raise BadVersion(f"unsupported version {version}")
    if kind != expected_kind:
        raise BadKind(f"expected kind {expected_kind:#04x}, got {kind:#04x}")
    if len(data) != expected_size:
        raise BadLength(f"kind {kind:#04x} must be {expected_size} bytes, got {len(data)}")
    return seq, ts


def packet_kind(data: bytes) -> int:
    """Kind byte of a well-prefixed packet, for dispatch before decode."""
    if len(data) < _HEADER.size:
        raise BadLength(f"packet too short for header: {len(data)} bytes")
    if data[:4] != MAGIC:
        raise BadMagic(f"bad magic {data[:4]!r}")
    if data[4] != PROTOCOL_VERSION:
        raise BadVersion(f"unsupported version {data[4]}")
    return data[5]


def encode_pose(frame: PoseFrame) -> bytes:
    header = _HEADER.pack(
        MAGIC, PROTOCOL_VERSION, KIND_POSE, frame.seq & 0xFFFFFFFF, frame.timestamp_us
    )
    body = np.ascontiguousarray(frame.data, dtype="<f4").tobytes()
    return header + body


def decode_pose(data: bytes) -> PoseFrame:
    seq, ts = _check_header(data, KIND_POSE, POSE_PACKET_SIZE)
    body = np.frombuffer(data, dtype="<f4", offset=_HEADER.size)
    return PoseFrame(seq=seq, timestamp_us=ts, data=body.reshape(LANDMARK_COUNT, 4))


def encode_feedback(fb: FeedbackState) -> bytes:
    if not 0.0 <= fb.hold_progress <= 1.0:
        raise ValueError(f"hold_progress out of range: {fb.hold_progress}")
    if not math.isfinite(fb.angle_deg):
        raise ValueError(f"angle_deg must be finite, got {fb.angle_deg}")
    header = _HEADER.pack(
        MAGIC, PROTOCOL_VERSION, KIND_FEEDBACK, fb.seq & 0xFFFFFFFF, fb.timestamp_us
    )
    body = _FEEDBACK_BODY.pack(
        fb.phase,
        fb.angle_deg,
        fb.hold_progress,
        fb.total_score,
        fb.current_streak,
        fb.rep_count,
        fb.posture_flags,
        fb.prompt_code,
        fb.audio_cue,
        b"\x00\x00",
    )
    return header + body


def decode_feedback(data: bytes) -> FeedbackState:
    seq, ts = _check_header(data, KIND_FEEDBACK, FEEDBACK_PACKET_SIZE)
    phase, angle, hold, score, streak, reps, flags, prompt, audio, _reserved = (
        _FEEDBACK_BODY.unpack_from(data, _HEADER.size)
    )
    return FeedbackState(
        seq=seq,
        timestamp_us=ts,
        phase=phase,
        angle_deg=angle,
        hold_progress=hold,
        total_score=score,
        current_streak=streak,
        rep_count=reps,
        posture_flags=flags,
        prompt_code=prompt,
        audio_cue=audio,
    )


def accept_frame(last_seq: int | None, incoming_seq: int) -> bool:
    """Latest-wins ordering for datagrams with a wrapping u32 counter.

    True when incoming_seq is strictly newer than last_seq under signed
    32-bit difference, so reordered and duplicated datagrams are dropped
    and the counter may wrap without a glitch. The first packet of a
    stream (last_seq None) is always accepted.
    """
    if last_seq is None:
        return True
    diff = (incoming_seq - last_seq) & 0xFFFFFFFF
    return 0 < diff < 0x80000000


_LEN_PREFIX = struct.Struct("<I")
MAX_FRAME_SIZE = 1 << 20


def frame_message(payload: bytes) -> bytes:
    """Length-prefix a message for the stream bridge."""
    return _LEN_PREFIX.pack(len(payload)) + payload


class FrameDecoder:
    """Incremental decoder for u32 length-prefixed stream frames."""

    def __init__(self):
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[bytes]:
        self._buf.extend(data)
        out = []
        while True:
            if len(self._buf) < _LEN_PREFIX.size:
                break
            (size,) = _LEN_PREFIX.unpack_from(self._buf)
            if size > MAX_FRAME_SIZE:
                raise BadLength(f"stream frame of {size} bytes exceeds limit")
            if len(self._buf) < _LEN_PREFIX.size + size:
                break
            start = _LEN_PREFIX.size
            out.append(bytes(self._buf[start : start + size]))
            del self._buf[: start + size]
        return out

    @property
    def pending(self) -> int:
        """Bytes buffered that do not yet form a complete frame."""
        return len(self._buf)
