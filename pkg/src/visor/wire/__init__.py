"""Length-prefixed TCP wire protocol."""

from .framing import (
    FramingError,
    MessageTooLargeError,
    ProtocolError,
    canonical_json,
    encode_frame,
    read_frame,
)

__all__ = [
    "FramingError",
    "MessageTooLargeError",
    "ProtocolError",
    "canonical_json",
    "encode_frame",
    "read_frame",
]
