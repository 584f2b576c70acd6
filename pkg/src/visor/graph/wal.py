"""On-disk persistence: write-ahead log and full snapshots.

Layout inside the store directory (see FORMATS.md at the repo root):

graph.wal     append-only, one record per committed transaction:
                  u32 payload length, u32 crc32(payload), payload
              payload := u64 commit version, u32 op count, ops
              A torn or checksum-failing tail record is discarded on
              recovery; everything before it is intact by construction.

graph.snapshot  magic "VDGS", u16 format version, u64 commit version,
                u64 next node id, u64 next edge id, schema entries,
                index definitions, nodes, edges, u32 crc32 of everything
                after the 6-byte prologue.  Written to a temp file and
                renamed into place; the WAL is truncated right after.
"""

from __future__ import annotations

import os
import struct
import zlib
from pathlib import Path

from ..errors import CorruptStoreError, ValidationError
from . import values
from .model import Edge, Node

SNAPSHOT_MAGIC = b"VDGS"
SNAPSHOT_VERSION = 1

OP_ADD_NODE = 1
OP_ADD_EDGE = 2
OP_SET_PROP = 3
OP_DEL_NODE = 4
OP_DEL_EDGE = 5
OP_CREATE_INDEX = 6

_U8 = struct.Struct("<B")
_U16 = struct.Struct("<H")
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")
_REC_HEADER = struct.Struct("<II")


# --- operation encoding ------------------------------------------------------


def encode_op(out: bytearray, op: tuple) -> None:
    kind = op[0]
    out += _U8.pack(kind)
    if kind == OP_ADD_NODE:
        _, node_id, node_class, props = op
        out += _U64.pack(node_id)
        values.encode_str(out, node_class)
        values.encode_props(out, props)
    elif kind == OP_ADD_EDGE:
        _, edge_id, edge_class, src, dst, props = op
        out += _U64.pack(edge_id)
        values.encode_str(out, edge_class)
        out += _U64.pack(src)
        out += _U64.pack(dst)
        values.encode_props(out, props)
    elif kind == OP_SET_PROP:
        _, node_id, name, value = op
        out += _U64.pack(node_id)
        values.encode_str(out, name)
        values.encode_value(out, value)
    elif kind in (OP_DEL_NODE, OP_DEL_EDGE):
        out += _U64.pack(op[1])
    elif kind == OP_CREATE_INDEX:
        _, node_class, prop = op
        values.encode_str(out, node_class)
        values.encode_str(out, prop)
    else:
        raise ValidationError(f"unknown op kind {kind}")


def decode_op(buf: bytes, off: int) -> tuple[tuple, int]:
    (kind,) = _U8.unpack_from(buf, off)
    off += 1
    if kind == OP_ADD_NODE:
        (node_id,) = _U64.unpack_from(buf, off)
        off += 8
        node_class, off = values.decode_str(buf, off)
        props, off = values.decode_props(buf, off)
        return (OP_ADD_NODE, node_id, node_class, props), off
    if kind == OP_ADD_EDGE:
        (edge_id,) = _U64.unpack_from(buf, off)
        off += 8
        edge_class, off = values.decode_str(buf, off)
        src, dst = _U64.unpack_from(buf, off)[0], _U64.unpack_from(buf, off + 8)[0]
        off += 16
        props, off = values.decode_props(buf, off)
        return (OP_ADD_EDGE, edge_id, edge_class, src, dst, props), off
    if kind == OP_SET_PROP:
        (node_id,) = _U64.unpack_from(buf, off)
        off += 8
        name, off = values.decode_str(buf, off)
        value, off = values.decode_value(buf, off)
        return (OP_SET_PROP, node_id, name, value), off
    if kind in (OP_DEL_NODE, OP_DEL_EDGE):
        (target,) = _U64.unpack_from(buf, off)
        return (kind, target), off + 8
    if kind == OP_CREATE_INDEX:
        node_class, off = values.decode_str(buf, off)
        prop, off = values.decode_str(buf, off)
        return (OP_CREATE_INDEX, node_class, prop), off
    raise CorruptStoreError(f"unknown op kind {kind} in log")


def encode_txn(version: int, ops: list[tuple]) -> bytes:
    out = bytearray()
    out += _U64.pack(version)
    out += _U32.pack(len(ops))
    for op in ops:
        encode_op(out, op)
    return bytes(out)


def decode_txn(payload: bytes) -> tuple[int, list[tuple]]:
    (version,) = _U64.unpack_from(payload, 0)
    (count,) = _U32.unpack_from(payload, 8)
    off = 12
    ops = []
    for _ in range(count):
        op, off = decode_op(payload, off)
        ops.append(op)
    if off != len(payload):
        raise CorruptStoreError("trailing bytes in log record")
    return version, ops


# --- write-ahead log ---------------------------------------------------------


class WriteAheadLog:
    def __init__(self, path: Path, truncate_to: int | None = None):
        self.path = path
        # Recovery hands us the end of the last intact record; anything past
        # it is a torn append that must go before we write behind it.
        if truncate_to is not None and path.exists():
            if path.stat().st_size > truncate_to:
                with open(path, "r+b") as fh:
                    fh.truncate(truncate_to)
                    fh.flush()
                    os.fsync(fh.fileno())
        self._fh = open(path, "ab")

    def append(self, payload: bytes) -> None:
        rec = _REC_HEADER.pack(len(payload), zlib.crc32(payload)) + payload
        self._fh.write(rec)
        self._fh.flush()
        os.fsync(self._fh.fileno())

    def size(self) -> int:
        return self._fh.tell()

    def truncate(self) -> None:
        self._fh.truncate(0)
        self._fh.seek(0)
        self._fh.flush()
        os.fsync(self._fh.fileno())

    def close(self) -> None:
        self._fh.close()


def scan_log(path: Path) -> tuple[list[bytes], int]:
    """Intact record payloads plus the offset where they end.  Everything
    past that offset is a torn or corrupt tail: the commit it belonged to
    never acknowledged, so recovery discards it."""
    if not path.exists():
        return [], 0
    data = path.read_bytes()
    payloads = []
    off = 0
    while off + _REC_HEADER.size <= len(data):
        length, crc = _REC_HEADER.unpack_from(data, off)
        start = off + _REC_HEADER.size
        end = start + length
        if end > len(data):
            break
        payload = data[start:end]
        if zlib.crc32(payload) != crc:
            break
        payloads.append(payload)
        off = end
    return payloads, off


# --- snapshot ----------------------------------------------------------------


def write_snapshot(path: Path, state) -> None:
    body = bytearray()
    body += _U64.pack(state.version)
    body += _U64.pack(state.next_node_id)
    body += _U64.pack(state.next_edge_id)

    body += _U32.pack(len(state.schema))
    for (node_class, prop), tag in sorted(state.schema.items()):
        values.encode_str(body, node_class)
        values.encode_str(body, prop)
        body += _U8.pack(tag)

    body += _U32.pack(len(state.indexes))
    for node_class, prop in sorted(state.indexes):
        values.encode_str(body, node_class)
        values.encode_str(body, prop)

    body += _U64.pack(len(state.nodes))
    for node_id in sorted(state.nodes):
        node = state.nodes[node_id]
        body += _U64.pack(node.node_id)
        values.encode_str(body, node.node_class)
        values.encode_props(body, node.properties)

    body += _U64.pack(len(state.edges))
    for edge_id in sorted(state.edges):
        edge = state.edges[edge_id]
        body += _U64.pack(edge.edge_id)
        values.encode_str(body, edge.edge_class)
        body += _U64.pack(edge.src)
        body += _U64.pack(edge.dst)
        values.encode_props(body, edge.properties)

    blob = SNAPSHOT_MAGIC + _U16.pack(SNAPSHOT_VERSION) + bytes(body)
    blob += _U32.pack(zlib.crc32(bytes(body)))

    tmp = path.with_suffix(".tmp")
    with open(tmp, "wb") as fh:
        fh.write(blob)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)
    _fsync_dir(path.parent)


def read_snapshot(path: Path):
    """Return (version, next_node_id, next_edge_id, schema, index defs, nodes,
    edges) or None when no snapshot exists."""
    if not path.exists():
        return None
    data = path.read_bytes()
    if len(data) < 10 or data[:4] != SNAPSHOT_MAGIC:
        raise CorruptStoreError(f"{path}: bad snapshot magic")
    (fmt,) = _U16.unpack_from(data, 4)
    if fmt != SNAPSHOT_VERSION:
        raise CorruptStoreError(f"{path}: unsupported snapshot format {fmt}")
    body, (crc,) = data[6:-4], _U32.unpack_from(data, len(data) - 4)
    if zlib.crc32(body) != crc:
        raise CorruptStoreError(f"{path}: snapshot checksum mismatch")

    off = 0
    (version,) = _U64.unpack_from(body, off)
    off += 8
    (next_node_id,) = _U64.unpack_from(body, off)
    off += 8
    (next_edge_id,) = _U64.unpack_from(body, off)
    off += 8

    (n,) = _U32.unpack_from(body, off)
    off += 4
    schema = {}
    for _ in range(n):
        node_class, off = values.decode_str(body, off)
        prop, off = values.decode_str(body, off)
        (tag,) = _U8.unpack_from(body, off)
        off += 1
        schema[(node_class, prop)] = tag

    (n,) = _U32.unpack_from(body, off)
    off += 4
    index_defs = []
    for _ in range(n):
        node_class, off = values.decode_str(body, off)
        prop, off = values.decode_str(body, off)
        index_defs.append((node_class, prop))

    (n,) = _U64.unpack_from(body, off)
    off += 8
    nodes = {}
    for _ in range(n):
        (node_id,) = _U64.unpack_from(body, off)
        off += 8
        node_class, off = values.decode_str(body, off)
        props, off = values.decode_props(body, off)
        nodes[node_id] = Node(node_id, node_class, props)

    (n,) = _U64.unpack_from(body, off)
    off += 8
    edges = {}
    for _ in range(n):
        (edge_id,) = _U64.unpack_from(body, off)
        off += 8
        edge_class, off = values.decode_str(body, off)
        src, dst = _U64.unpack_from(body, off)[0], _U64.unpack_from(body, off + 8)[0]
        off += 16
        props, off = values.decode_props(body, off)
        edges[edge_id] = Edge(edge_id, edge_class, src, dst, props)

    return version, next_node_id, next_edge_id, schema, index_defs, nodes, edges


def _fsync_dir(path: Path) -> None:
    fd = os.open(path, os.O_RDONLY)
    try:
        os.fsync(fd)
    finally:
        os.close(fd)
