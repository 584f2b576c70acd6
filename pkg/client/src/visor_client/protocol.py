"""Wire protocol: length-prefixed frames carrying canonical JSON + blobs.

Independent implementation of the documented framing (see API.md in the
server repository):

    magic "VDMS" | version u8 | flags u8 | json_length u32 LE |
    blob_count u32 LE | json bytes | (length u32 LE, bytes) per blob

Requests are encoded canonically (compact separators, sorted keys), so a
given envelope always produces the same bytes; the server test suite pins
golden frames against this.
"""

from __future__ import annotations

import json
import socket
import struct

from .errors import ClientClosedError, FrameError, ProtocolVersionError

MAGIC = b"VDMS"
VERSION = 1
FLAG_TIMING = 0x01

_HEADER = struct.Struct("<4sBBII")
_U32 = struct.Struct("<I")


def canonical_json(obj) -> bytes:
    return json.dumps(obj, separators=(",", ":"), sort_keys=True).encode("utf-8")


def encode_frame(payload, blobs=(), flags: int = 0) -> bytes:
    """`payload`: JSON-encodable object, a JSON string, or raw bytes."""
    if isinstance(payload, bytes):
        body = payload
    elif isinstance(payload, str):
        body = payload.encode("utf-8")
    else:
        body = canonical_json(payload)
    out = bytearray(_HEADER.pack(MAGIC, VERSION, flags, len(body), len(blobs)))
    out += body
    for blob in blobs:
        out += _U32.pack(len(blob))
        out += blob
    return bytes(out)


def _read_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining:
        chunk = sock.recv(min(remaining, 1 << 20))
        if not chunk:
            raise ClientClosedError("server closed the connection mid-frame")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def read_frame(sock: socket.socket):
    """Returns (flags, json_bytes, blobs); validates magic and version."""
    header = _read_exact(sock, _HEADER.size)
    magic, version, flags, json_length, blob_count = _HEADER.unpack(header)
    if magic != MAGIC:
        raise FrameError(f"bad frame magic {magic!r}")
    if version != VERSION:
        raise ProtocolVersionError(VERSION, version)
    body = _read_exact(sock, json_length)
    blobs = []
    for _ in range(blob_count):
        (length,) = _U32.unpack(_read_exact(sock, 4))
        blobs.append(_read_exact(sock, length))
    return flags, body, blobs
