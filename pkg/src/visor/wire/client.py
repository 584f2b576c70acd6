"""Minimal in-repo client for tests and the benchmark harness.

Counts bytes in both directions so the harness can report wire traffic
without a capturing proxy.  The standalone client package offers the same
protocol for external consumers.
"""

from __future__ import annotations

import json
import socket

from . import framing


class WireClient:
    def __init__(self, host: str, port: int, timeout: float = 30.0):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.sock.settimeout(timeout)
        self.bytes_out = 0
        self.bytes_in = 0

    def query(self, commands, blobs=(), flags: int = 0):
        """Send one envelope, wait for the response.

        Returns (responses, blobs, timing) where timing is the server's
        breakdown dict when requested via framing.FLAG_TIMING, else None.
        """
        frame = framing.encode_frame(commands, list(blobs), flags)
        self.sock.sendall(frame)
        self.bytes_out += len(frame)
        rflags, body, rblobs = self._read_counted()
        del rflags
        payload = json.loads(body)
        return payload.get("responses", []), rblobs, payload.get("_timing")

    def query_timed(self, commands, blobs=()):
        return self.query(commands, blobs, flags=framing.FLAG_TIMING)

    def _read_counted(self):
        counting = _CountingSocket(self.sock)
        result = framing.read_frame(counting)
        self.bytes_in += counting.count
        return result

    def close(self):
        try:
            self.sock.close()
        except OSError:
            pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


class _CountingSocket:
    def __init__(self, sock):
        self._sock = sock
        self.count = 0

    def recv(self, n):
        data = self._sock.recv(n)
        self.count += len(data)
        return data

    def settimeout(self, value):
        self._sock.settimeout(value)
