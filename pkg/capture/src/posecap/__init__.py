from .client import CaptureConfig, stream
from .protocol import encode_pose_packet

__all__ = ["CaptureConfig", "stream", "encode_pose_packet"]
