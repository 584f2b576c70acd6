"""Binary framing for the request/response protocol.

One message on the wire:

    magic       "VDMS" (4 bytes)
    version     u8  (currently 1)
    flags       u8  (bit 0: include timing breakdown in the response)
    json_length u32 little-endian
    blob_count  u32 little-endian
    json payload (json_length bytes)
    blobs: blob_count times (length u32 LE, bytes)

JSON payloads are canonical: compact separators, sorted keys, UTF-8.  That
makes frames for a given envelope reproducible byte for byte, which client
implementations verify against golden frames.
"""

from __future__ import annotations

import json
import struct

MAGIC = b"VDMS"
VERSION = 1
HEADER = struct.Struct("<4sBBII")
_U32 = struct.Struct("<I")

DEFAULT_MAX_MESSAGE = 256 * 1024 * 1024

FLAG_TIMING = 0x01


class FramingError(Exception):
    """The byte stream does not hold a well-formed frame; unrecoverable for
    this connection."""


class ProtocolError(FramingError):
    """Recognizably framed but not speakable (bad magic or version)."""

    def __init__(self, message, *, got_version=None):
        super().__init__(message)
        self.got_version = got_version


class MessageTooLargeError(FramingError):
    """Declared sizes exceed the limit; the connection can survive."""


class ConnectionClosed(FramingError):
    pass


def canonical_json(obj) -> bytes:
    return json.dumps(obj, separators=(",", ":"), sort_keys=True).encode("utf-8")


def encode_frame(payload, blobs=(), flags: int = 0) -> bytes:
    """`payload` is a JSON-encodable object or pre-encoded bytes."""
    body = payload if isinstance(payload, bytes) else canonical_json(payload)
    out = bytearray()
    out += HEADER.pack(MAGIC, VERSION, flags, len(body), len(blobs))
    out += body
    for blob in blobs:
        out += _U32.pack(len(blob))
        out += blob
    return bytes(out)


def _read_exact(sock, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining:
        chunk = sock.recv(min(remaining, 1 << 20))
        if not chunk:
            raise ConnectionClosed("peer closed mid-frame")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def _discard(sock, n: int) -> None:
    remaining = n
    while remaining:
        chunk = sock.recv(min(remaining, 1 << 20))
        if not chunk:
            raise ConnectionClosed("peer closed mid-frame")
        remaining -= len(chunk)


def read_frame(sock, max_bytes: int = DEFAULT_MAX_MESSAGE, body_timeout=None):
    """Read one frame; returns (flags, json_bytes, blobs).

    Blocks indefinitely for the first byte; once a frame has started,
    `body_timeout` (seconds) bounds how long the peer may stall.  Raises
    ProtocolError for bad magic/version (caller should close),
    MessageTooLargeError after draining an oversized frame (caller may keep
    the connection), ConnectionClosed on EOF, timeout, or undrainable junk.
    """
    first = sock.recv(1)
    if not first:
        raise ConnectionClosed("connection closed")
    if body_timeout is not None:
        sock.settimeout(body_timeout)
    try:
        return _read_frame_body(sock, first, max_bytes)
    except TimeoutError:
        raise ConnectionClosed("peer stalled mid-frame") from None
    finally:
        if body_timeout is not None:
            sock.settimeout(None)


def _read_frame_body(sock, first: bytes, max_bytes: int):
    header = first + _read_exact(sock, HEADER.size - 1)
    magic, version, flags, json_length, blob_count = HEADER.unpack(header)
    if magic != MAGIC:
        raise ProtocolError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ProtocolError(
            f"protocol version mismatch: ours {VERSION}, peer sent {version}",
            got_version=version,
        )
    if json_length > max_bytes or blob_count > max_bytes // 4:
        _drain_oversize(sock, json_length, blob_count, max_bytes)
        raise MessageTooLargeError(f"declared sizes exceed the {max_bytes} byte limit")
    body = _read_exact(sock, json_length)
    total = json_length
    blobs = []
    for i in range(blob_count):
        (length,) = _U32.unpack(_read_exact(sock, 4))
        total += 4 + length
        if total > max_bytes:
            _discard(sock, length)
            _drain_oversize(sock, 0, blob_count - i - 1, max_bytes)
            raise MessageTooLargeError(f"message exceeds the {max_bytes} byte limit")
        blobs.append(_read_exact(sock, length))
    return flags, body, blobs


def _drain_oversize(sock, json_length: int, blob_count: int, max_bytes: int) -> None:
    """Consume the rest of a frame whose declared size busts the limit, so
    that the connection can keep being used.  Discarding is memory-safe but
    not free, so give up (forcing a close) past a generous budget."""
    budget = max(4 * max_bytes, 64 << 20)
    if json_length > budget:
        raise ConnectionClosed("oversize frame too large to drain")
    _discard(sock, json_length)
    budget -= json_length
    for _ in range(blob_count):
        budget -= 4
        if budget <= 0:
            raise ConnectionClosed("oversize frame too large to drain")
        (length,) = _U32.unpack(_read_exact(sock, 4))
        if length > budget:
            raise ConnectionClosed("oversize frame too large to drain")
        _discard(sock, length)
        budget -= length
