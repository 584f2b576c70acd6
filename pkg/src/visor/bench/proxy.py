"""TCP relay used by the harness: byte accounting and bandwidth caps.

The cap is a simple pacing loop per direction: after relaying N bytes the
sender sleeps until N/rate seconds have elapsed since the stream started,
approximating a fixed-bandwidth link well enough for A/B comparisons.
"""

from __future__ import annotations

import socket
import threading
import time


class ThrottlingProxy:
    def __init__(
        self,
        target_host: str,
        target_port: int,
        bandwidth_bps: float | None = None,
        host: str = "127.0.0.1",
    ):
        self.target = (target_host, target_port)
        self.bandwidth_bps = bandwidth_bps
        self.bytes_to_server = 0
        self.bytes_to_client = 0
        self._lock = threading.Lock()
        self._stopping = threading.Event()
        self._threads: list[threading.Thread] = []
        self._conns: set[socket.socket] = set()

        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind((host, 0))
        self._listener.listen(64)
        self._listener.settimeout(0.2)  # so stop() can interrupt accept()
        self.host = host
        self.port = self._listener.getsockname()[1]

    def start(self) -> "ThrottlingProxy":
        thread = threading.Thread(target=self._accept_loop, daemon=True)
        thread.start()
        self._threads.append(thread)
        return self

    def stop(self) -> None:
        self._stopping.set()
        try:
            self._listener.close()
        except OSError:
            pass
        for conn in list(self._conns):
            try:
                conn.close()
            except OSError:
                pass
        for thread in self._threads:
            thread.join(timeout=5)

    def _accept_loop(self) -> None:
        while not self._stopping.is_set():
            try:
                client, _ = self._listener.accept()
            except TimeoutError:
                continue
            except OSError:
                return
            try:
                upstream = socket.create_connection(self.target, timeout=10)
            except OSError:
                client.close()
                continue
            for sock in (client, upstream):
                sock.settimeout(None)
                sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                self._conns.add(sock)
            for src, dst, direction in (
                (client, upstream, "to_server"),
                (upstream, client, "to_client"),
            ):
                thread = threading.Thread(
                    target=self._relay, args=(src, dst, direction), daemon=True
                )
                thread.start()
                self._threads.append(thread)

    def _relay(self, src: socket.socket, dst: socket.socket, direction: str) -> None:
        sent = 0
        started = time.monotonic()
        try:
            while True:
                data = src.recv(16384)
                if not data:
                    break
                dst.sendall(data)
                sent += len(data)
                with self._lock:
                    if direction == "to_server":
                        self.bytes_to_server += len(data)
                    else:
                        self.bytes_to_client += len(data)
                if self.bandwidth_bps:
                    due = started + sent / self.bandwidth_bps
                    delay = due - time.monotonic()
                    if delay > 0:
                        time.sleep(delay)
        except OSError:
            pass
        finally:
            for sock in (src, dst):
                try:
                    sock.shutdown(socket.SHUT_RDWR)
                except OSError:
                    pass

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()
        return False
