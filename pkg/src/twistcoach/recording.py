"""Pose stream recording (.tshfrec), replay and impairment injection.

File layout: one UTF-8 JSON header line terminated by '\\n', then zero
or more records of [u32 delta_us little-endian][one 546-byte PosePacket].
The delta is the capture-time gap to the previous packet (0 for the
first). Replay pacing scales these deltas; the exercise logic always
takes its dt from the timestamps inside the packets, which is what makes
replay at any speed produce identical results.

Impairment is deterministic under ImpairmentSpec.seed (numpy PCG64, the
algorithm id is stored in headers). Per input packet, in order: an
independent loss draw, a delivery-delay draw in [0, jitter_ms], an
independent duplicate draw (the copy gets its own delay), and a reorder
draw that pushes the packet one nominal frame gap later. Packets are
then stably sorted by delivery time and the deltas rebuilt.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from . import protocol
from .synth import RNG_ALGORITHM

FORMAT_NAME = "tshfrec"
FORMAT_VERSION = 1

_DELTA = struct.Struct("<I")


class RecordingError(ValueError):
    """Corrupt recording; carries the byte offset of the damage."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


def write_recording(path: str, stream: Iterable[tuple[int, bytes]], meta: dict | None = None) -> int:
    """Write (delta_us, packet) records; returns the number of packets."""
    header = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "rng": RNG_ALGORITHM,
        "meta": meta or {},
    }
    count = 0
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, ensure_ascii=False).encode("utf-8") + b"\n")
        for delta_us, packet in stream:
            if delta_us < 0:
                raise ValueError(f"negative delta_us at packet {count}")
            fh.write(_DELTA.pack(min(delta_us, 0xFFFFFFFF)))
            fh.write(packet)
            count += 1
    return count


def read_header(path: str) -> dict:
    with open(path, "rb") as fh:
        return _parse_header(fh)


def _parse_header(fh) -> dict:
    line = fh.readline(1 << 20)
    if not line.endswith(b"\n"):
        raise RecordingError("missing header line", 0)
    try:
        header = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise RecordingError("header is not valid JSON", 0) from None
    if not isinstance(header, dict) or header.get("format") != FORMAT_NAME:
        raise RecordingError("not a tshfrec recording", 0)
    if header.get("version") != FORMAT_VERSION:
        raise RecordingError(f"unsupported version {header.get('version')}", 0)
    return header


def read_recording(path: str) -> tuple[dict, list[tuple[int, bytes]]]:
    """Parse a recording fully; corrupt records fail with byte offsets."""
    with open(path, "rb") as fh:
        header = _parse_header(fh)
        offset = fh.tell()
        records: list[tuple[int, bytes]] = []
        while True:
            prefix = fh.read(_DELTA.size)
            if not prefix:
                break
            if len(prefix) < _DELTA.size:
                raise RecordingError("truncated delta prefix", offset)
            (delta_us,) = _DELTA.unpack(prefix)
            packet = fh.read(protocol.POSE_PACKET_SIZE)
            if len(packet) < protocol.POSE_PACKET_SIZE:
                raise RecordingError("truncated packet", offset + _DELTA.size)
            try:
                protocol.decode_pose(packet)
            except protocol.ProtocolError as exc:
                raise RecordingError(f"bad packet: {exc}", offset + _DELTA.size) from exc
            records.append((delta_us, packet))
            offset += _DELTA.size + protocol.POSE_PACKET_SIZE
    return header, records


def replay_deltas(records: list[tuple[int, bytes]], speed: float) -> Iterator[tuple[float, bytes]]:
    """(sleep_seconds, packet) pairs for paced replay.

    speed is a multiplier (4.0 replays four times faster); math.inf (or
    any non-finite) means as-fast-as-possible with zero sleeps.
    """
    if speed <= 0:
        raise ValueError("speed must be positive")
    fast = not np.isfinite(speed)
    for delta_us, packet in records:
        yield (0.0 if fast else delta_us / 1e6 / speed), packet


@dataclass(frozen=True)
class ImpairmentSpec:
    loss_rate: float = 0.0
    reorder_rate: float = 0.0
    duplicate_rate: float = 0.0
    jitter_ms: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("loss_rate", "reorder_rate", "duplicate_rate"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ValueError(f"{name} must be in [0, 1)")
        if self.jitter_ms < 0:
            raise ValueError("jitter_ms must be non-negative")

    @property
    def identity(self) -> bool:
        return (
            self.loss_rate == 0.0
            and self.reorder_rate == 0.0
            and self.duplicate_rate == 0.0
            and self.jitter_ms == 0.0
        )


def impair(records: list[tuple[int, bytes]], spec: ImpairmentSpec) -> list[tuple[int, bytes]]:
    """Apply loss/duplication/reordering/jitter to a recorded stream.

    Packet contents are untouched; only presence and delivery order
    change, exactly as a UDP path would.
    """
    if spec.identity:
        return list(records)
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    n = len(records)
    if n == 0:
        return []

    deltas = np.array([d for d, _ in records], dtype=np.float64)
    send_times = np.cumsum(deltas)
    nominal_gap = float(np.median(deltas[1:])) if n > 1 else 1e6 / 30.0

    lose = rng.random(n) < spec.loss_rate
    jitter = rng.random(n) * spec.jitter_ms * 1000.0
    duplicate = rng.random(n) < spec.duplicate_rate
    dup_jitter = rng.random(n) * spec.jitter_ms * 1000.0
    reorder = rng.random(n) < spec.reorder_rate

    deliveries: list[tuple[float, int]] = []  # (delivery_time_us, record index)
    for i in range(n):
        if lose[i]:
            continue
        t = send_times[i] + jitter[i]
        if reorder[i]:
            t += 1.5 * nominal_gap
        deliveries.append((t, i))
        if duplicate[i]:
            deliveries.append((t + 1.0 + dup_jitter[i], i))

    deliveries.sort(key=lambda pair: pair[0])
    out: list[tuple[int, bytes]] = []
    prev_t = None
    for t, i in deliveries:
        delta = 0 if prev_t is None else max(0, int(round(t - prev_t)))
        prev_t = t
        out.append((delta, records[i][1]))
    return out
