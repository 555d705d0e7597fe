"""Pose packet encoder, written against docs/protocol.md.

Deliberately independent of the engine package: this is the second
implementation of the wire format, and the conformance tests hold the
two against the shared golden fixtures. Only the encode direction is
needed here; the client never parses engine traffic.
"""

import struct

import numpy as np

MAGIC = b"TSHF"
VERSION = 1
KIND_POSE = 0x01
LANDMARK_COUNT = 33
POSE_PACKET_SIZE = 546

_HEADER = struct.Struct("<4sBBIQ")


def encode_pose_packet(seq: int, timestamp_us: int, landmarks) -> bytes:
    """546-byte pose packet: 18-byte header + 33 x (x, y, z, visibility) f32."""
    arr = np.asarray(landmarks, dtype="<f4")
    if arr.shape != (LANDMARK_COUNT, 4):
        raise ValueError(f"landmarks must be (33, 4), got {arr.shape}")
    header = _HEADER.pack(MAGIC, VERSION, KIND_POSE, seq & 0xFFFFFFFF, timestamp_us)
    packet = header + np.ascontiguousarray(arr).tobytes()
    assert len(packet) == POSE_PACKET_SIZE
    return packet
