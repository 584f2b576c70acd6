"""The Connection: one socket, one in-flight request at a time.

Blobs pass through untouched in both directions; the client performs no
retries (the server treats each envelope as one atomic transaction, and
idempotence is not assumed).  Callers needing parallel requests open
multiple connections.
"""

from __future__ import annotations

import json
import socket
import threading

from . import protocol
from .errors import ClientClosedError, ClientError


class Connection:
    def __init__(self, host: str, port: int, timeout: float = 30.0):
        self.host = host
        self.port = port
        self.protocol_version = protocol.VERSION
        # ConnectionRefusedError / TimeoutError propagate as themselves.
        self._sock = socket.create_connection((host, port), timeout=timeout)
        self._sock.settimeout(timeout)
        self._lock = threading.Lock()
        self._closed = False
        self._handshake()

    def _handshake(self) -> None:
        """Exchange an empty envelope so a version mismatch (or a non-visor
        endpoint) surfaces at connect time rather than mid-session."""
        try:
            responses, blobs = self.query([])
        except ClientError:
            self.close()
            raise
        if responses != [] or blobs != []:
            self.close()
            raise ClientError(f"unexpected handshake response: {responses!r}")

    def query(self, commands, blobs=(), include_timing: bool = False):
        """Send one envelope; returns (responses, blobs).

        `commands` is a list of command objects or a pre-encoded JSON
        string.  Server-side command failures are reported in the returned
        response statuses, never raised.
        """
        flags = protocol.FLAG_TIMING if include_timing else 0
        frame = protocol.encode_frame(commands, list(blobs), flags)
        with self._lock:
            if self._closed:
                raise ClientClosedError("connection is closed")
            try:
                self._sock.sendall(frame)
                _, body, out_blobs = protocol.read_frame(self._sock)
            except (OSError, ClientError):
                # a broken or misbehaving stream is unrecoverable
                self._closed = True
                raise
        payload = json.loads(body)
        self._last_timing = payload.get("_timing")
        return payload.get("responses", []), out_blobs

    @property
    def last_timing(self):
        """Server timing breakdown of the previous query, when requested."""
        return getattr(self, "_last_timing", None)

    @property
    def closed(self) -> bool:
        return self._closed

    def close(self) -> None:
        self._closed = True
        try:
            self._sock.close()
        except OSError:
            pass

    def __enter__(self) -> "Connection":
        return self

    def __exit__(self, *exc) -> bool:
        self.close()
        return False


def connect(host: str, port: int, timeout: float = 30.0) -> Connection:
    return Connection(host, port, timeout)
