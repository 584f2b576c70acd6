"""The network front end.

Each accepted connection gets a reader thread; envelope execution is handed
to a bounded worker pool, and the reader waits for the result before
reading the next frame, so responses per connection are FIFO and exactly
one envelope per connection is in flight.  Read envelopes run concurrently
across connections; write envelopes serialize on the engine's writer lock.

Framing failures are contained per connection: garbage framing gets an
error frame and a close, an oversized frame gets an error frame and the
connection survives.
"""

from __future__ import annotations

import logging
import signal
import socket
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import count
from pathlib import Path

from ..descriptors.store import DescriptorStore
from ..engine import QueryEngine
from ..errors import STATUS_INTERNAL, STATUS_VALIDATION
from ..graph.store import GraphStore
from ..visual.store import VisualStore
from ..wire import framing
from .config import ServerConfig

log = logging.getLogger("visor.server")

FRAME_BODY_TIMEOUT = 30.0


class TimingCollector:
    """Per-envelope phase timer; monotonic clock, microsecond report."""

    CATEGORIES = ("metadata", "retrieval", "preprocess")

    def __init__(self):
        self._elapsed = dict.fromkeys(self.CATEGORIES, 0.0)

    def start(self, category: str):
        return (category, time.monotonic())

    def stop(self, token) -> None:
        category, started = token
        if category in self._elapsed:
            self._elapsed[category] += time.monotonic() - started

    def report(self) -> dict:
        return {
            "metadata_us": int(self._elapsed["metadata"] * 1e6),
            "retrieval_us": int(self._elapsed["retrieval"] * 1e6),
            "preprocess_us": int(self._elapsed["preprocess"] * 1e6),
        }


@dataclass
class Session:
    session_id: int
    peer: tuple
    envelopes: int = 0
    bytes_in: int = 0
    bytes_out: int = 0


@dataclass
class _Core:
    """Shared stores behind one data directory."""

    graph: GraphStore
    visual: VisualStore
    descriptors: DescriptorStore
    engine: QueryEngine = field(init=False)

    def __post_init__(self):
        self.engine = QueryEngine(self.graph, self.visual, self.descriptors)


def open_core(data_dir) -> _Core:
    root = Path(data_dir)
    return _Core(
        graph=GraphStore(root / "graph"),
        visual=VisualStore(root / "blobs"),
        descriptors=DescriptorStore(root / "descriptors"),
    )


class Server:
    def __init__(self, config: ServerConfig):
        self.config = config
        self.core = open_core(config.data_dir)
        self._ensure_indexes()
        self._pool = ThreadPoolExecutor(
            max_workers=config.workers, thread_name_prefix="visor-worker"
        )
        self._listener: socket.socket | None = None
        self._threads: list[threading.Thread] = []
        self._conns: set[socket.socket] = set()
        self._conn_lock = threading.Lock()
        self._stopping = threading.Event()
        self._session_ids = count(1)
        self.sessions: list[Session] = []
        self.port: int | None = None

    def _ensure_indexes(self) -> None:
        if not self.config.indexes:
            return
        txn = self.core.graph.begin()
        for entry in self.config.indexes:
            node_class, _, prop = entry.partition(".")
            self.core.graph.create_index(txn, node_class, prop)
        self.core.graph.commit(txn)

    # --- lifecycle -------------------------------------------------------------

    def start(self) -> None:
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind((self.config.host, self.config.port))
        listener.listen(128)
        # close() does not reliably wake a blocked accept(); poll instead
        listener.settimeout(0.2)
        self._listener = listener
        self.port = listener.getsockname()[1]
        accept_thread = threading.Thread(
            target=self._accept_loop, name="visor-accept", daemon=True
        )
        accept_thread.start()
        self._threads.append(accept_thread)
        log.info("listening on %s:%d", self.config.host, self.port)

    def stop(self) -> None:
        self._stopping.set()
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass
        with self._conn_lock:
            conns = list(self._conns)
        for conn in conns:
            try:
                conn.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            try:
                conn.close()
            except OSError:
                pass
        for thread in self._threads:
            thread.join(timeout=10)
        self._pool.shutdown(wait=True)
        self.core.graph.close()
        log.info("stopped")

    # --- connection handling ------------------------------------------------------

    def _accept_loop(self) -> None:
        while not self._stopping.is_set():
            try:
                conn, peer = self._listener.accept()
            except TimeoutError:
                continue
            except OSError:
                return
            conn.settimeout(None)
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            with self._conn_lock:
                self._conns.add(conn)
            session = Session(next(self._session_ids), peer)
            self.sessions.append(session)
            thread = threading.Thread(
                target=self._serve_connection,
                args=(conn, session),
                name=f"visor-conn-{session.session_id}",
                daemon=True,
            )
            thread.start()
            self._threads.append(thread)

    def _serve_connection(self, conn: socket.socket, session: Session) -> None:
        try:
            while not self._stopping.is_set():
                try:
                    flags, body, blobs = self._read_counted(conn, session)
                except framing.MessageTooLargeError as exc:
                    self._respond_error(
                        conn, session, STATUS_VALIDATION, str(exc)
                    )
                    continue  # connection survives an oversized frame
                except framing.ProtocolError as exc:
                    self._respond_error(conn, session, STATUS_VALIDATION, str(exc))
                    return
                except framing.FramingError:
                    return  # EOF / torn frame: nothing sane to answer
                self._handle(conn, session, flags, body, blobs)
        except OSError:
            pass
        finally:
            with self._conn_lock:
                self._conns.discard(conn)
            try:
                conn.close()
            except OSError:
                pass

    def _read_counted(self, conn, session: Session):
        counting = _CountingRecv(conn)
        try:
            return framing.read_frame(
                counting, self.config.max_message_bytes, FRAME_BODY_TIMEOUT
            )
        finally:
            session.bytes_in += counting.count

    def _handle(self, conn, session: Session, flags, body, blobs) -> None:
        timing = TimingCollector() if flags & framing.FLAG_TIMING else None
        future = self._pool.submit(self._execute, body, blobs, timing)
        try:
            responses, out_blobs = future.result()
        except Exception as exc:  # noqa: BLE001 - engine already guards; belt and braces
            log.exception("envelope execution failed")
            responses, out_blobs = (
                [{"status": STATUS_INTERNAL, "info": f"internal error: {exc}"}],
                [],
            )
        payload = {"responses": responses}
        if timing is not None:
            payload["_timing"] = timing.report()
        frame = framing.encode_frame(payload, out_blobs)
        conn.sendall(frame)
        session.bytes_out += len(frame)
        session.envelopes += 1

    def _execute(self, body, blobs, timing):
        return self.core.engine.execute(body, blobs, timing=timing)

    def _respond_error(self, conn, session: Session, status: int, info: str) -> None:
        frame = framing.encode_frame({"responses": [{"status": status, "info": info}]})
        try:
            conn.sendall(frame)
            session.bytes_out += len(frame)
        except OSError:
            pass


class _CountingRecv:
    def __init__(self, sock):
        self._sock = sock
        self.count = 0

    def recv(self, n):
        data = self._sock.recv(n)
        self.count += len(data)
        return data

    def settimeout(self, value):
        self._sock.settimeout(value)


def serve(config: ServerConfig) -> None:
    """Run until SIGINT/SIGTERM; used by the CLI entry point."""
    server = Server(config)
    server.start()
    stop = threading.Event()

    def handler(signum, frame):
        stop.set()

    signal.signal(signal.SIGINT, handler)
    signal.signal(signal.SIGTERM, handler)
    print(f"visor-server listening on {config.host}:{server.port}", flush=True)
    stop.wait()
    server.stop()
