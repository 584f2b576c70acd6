"""Descriptor set persistence (VDDS files) and transaction overlays.

Each set serializes to `<name>.vdds` under the store root, rewritten
atomically when a transaction that touched it commits.  Uncommitted
additions live in a per-transaction overlay: searches inside the owning
transaction see them, other sessions do not.

VDDS layout (little-endian):

    magic "VDDS" (4 bytes)
    version     u16 (currently 1)
    dimension   u32
    count       u64
    n_labels    u32, then that many (u32 length, utf-8 bytes) label strings
    records     count fixed-stride records:
                    id u64, metadata node i64 (-1 none),
                    label index i32 (-1 none), vector f32 * dimension
"""

from __future__ import annotations

import os
import re
import struct
import threading
from pathlib import Path

import numpy as np

from ..errors import (
    CorruptStoreError,
    DuplicateSetError,
    UnknownSetError,
    ValidationError,
)
from .index import DescriptorSet, SearchHit

MAGIC = b"VDDS"
VERSION = 1

_HEADER = struct.Struct("<4sHIQ")
_U32 = struct.Struct("<I")
_REC_FIXED = struct.Struct("<Qqi")

_NAME_RE = re.compile(r"^[A-Za-z0-9._-]{1,128}$")


def _check_name(name: str) -> None:
    if not isinstance(name, str) or not _NAME_RE.match(name):
        raise ValidationError(
            "descriptor set names are 1-128 chars of [A-Za-z0-9._-]"
        )


def dump_set(ds: DescriptorSet) -> bytes:
    labels = sorted({l for l in ds._labels if l is not None})
    label_idx = {l: i for i, l in enumerate(labels)}
    out = bytearray()
    out += _HEADER.pack(MAGIC, VERSION, ds.dimension, len(ds))
    out += _U32.pack(len(labels))
    for label in labels:
        raw = label.encode("utf-8")
        out += _U32.pack(len(raw))
        out += raw
    for i in range(len(ds)):
        node = ds._nodes[i]
        label = ds._labels[i]
        out += _REC_FIXED.pack(
            i + 1,
            -1 if node is None else node,
            -1 if label is None else label_idx[label],
        )
        out += ds._vectors[i].astype("<f4").tobytes()
    return bytes(out)


def load_set(name: str, data: bytes) -> DescriptorSet:
    if len(data) < _HEADER.size or data[:4] != MAGIC:
        raise CorruptStoreError(f"set {name!r}: bad VDDS magic")
    _, version, dimension, count = _HEADER.unpack_from(data, 0)
    if version != VERSION:
        raise CorruptStoreError(f"set {name!r}: unsupported VDDS version {version}")
    off = _HEADER.size
    (n_labels,) = _U32.unpack_from(data, off)
    off += 4
    labels = []
    for _ in range(n_labels):
        (n,) = _U32.unpack_from(data, off)
        off += 4
        labels.append(data[off : off + n].decode("utf-8"))
        off += n
    ds = DescriptorSet(name, dimension)
    stride = _REC_FIXED.size + 4 * dimension
    if off + stride * count != len(data):
        raise CorruptStoreError(f"set {name!r}: VDDS length mismatch")
    vectors = np.empty((count, dimension), np.float32)
    for i in range(count):
        rec_id, node, label_i = _REC_FIXED.unpack_from(data, off)
        off += _REC_FIXED.size
        if rec_id != i + 1:
            raise CorruptStoreError(f"set {name!r}: record ids out of order")
        vectors[i] = np.frombuffer(data, "<f4", dimension, off)
        off += 4 * dimension
        ds._labels.append(None if label_i < 0 else labels[label_i])
        ds._nodes.append(None if node < 0 else node)
    ds._vectors = vectors
    return ds


class DescriptorTxn:
    """Overlay of uncommitted set creations and additions."""

    def __init__(self, store: "DescriptorStore"):
        self._store = store
        self.new_sets: dict[str, int] = {}  # name -> dimension
        self.adds: dict[str, list[tuple]] = {}  # name -> [(f32 vec, label, node)]

    def create_set(self, name: str, dimension: int) -> None:
        _check_name(name)
        if name in self.new_sets or self._store._committed_has(name):
            raise DuplicateSetError(f"descriptor set {name!r} already exists")
        DescriptorSet(name, dimension)  # validate parameters
        self.new_sets[name] = dimension

    def _resolve(self, name: str) -> DescriptorSet:
        ds = self._store._committed_get(name)
        if ds is None:
            if name not in self.new_sets:
                raise UnknownSetError(name)
            ds = DescriptorSet(name, self.new_sets[name])
        return ds

    def add(self, name: str, vector, label=None, metadata_node=None) -> int:
        ds = self._resolve(name)
        v = ds.check_vector(vector)
        pending = self.adds.setdefault(name, [])
        pending.append((v, label, metadata_node))
        return len(ds) + len(pending)

    def knn(self, name: str, query, k: int) -> list[SearchHit]:
        ds = self._resolve(name)
        return ds.knn(query, k, extra=self.adds.get(name))

    def classify(self, name: str, query, k: int) -> str:
        ds = self._resolve(name)
        return ds.classify(query, k, extra=self.adds.get(name))

    def set_size(self, name: str) -> int:
        return len(self._resolve(name)) + len(self.adds.get(name, ()))


class DescriptorStore:
    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._sets: dict[str, DescriptorSet] = {}
        for path in sorted(self.root.glob("*.vdds")):
            name = path.stem
            self._sets[name] = load_set(name, path.read_bytes())

    def _committed_has(self, name: str) -> bool:
        with self._lock:
            return name in self._sets

    def _committed_get(self, name: str) -> DescriptorSet | None:
        with self._lock:
            return self._sets.get(name)

    def begin(self) -> DescriptorTxn:
        return DescriptorTxn(self)

    def commit(self, txn: DescriptorTxn) -> None:
        """Fold the overlay into the committed sets and rewrite touched
        files atomically.  Runs after the graph commit succeeded.  Touched
        sets are replaced copy-on-write, never mutated, so concurrent
        searches against the old objects stay internally consistent."""
        with self._lock:
            for name, dimension in txn.new_sets.items():
                if name in self._sets:
                    raise DuplicateSetError(f"descriptor set {name!r} already exists")
                self._sets[name] = DescriptorSet(name, dimension)
            for name, pending in txn.adds.items():
                self._sets[name] = self._sets[name].extended(pending)
            touched = set(txn.new_sets) | set(txn.adds)
            for name in touched:
                self._write(self._sets[name])
        txn.new_sets = {}
        txn.adds = {}

    def _write(self, ds: DescriptorSet) -> None:
        path = self.root / f"{ds.name}.vdds"
        tmp = path.with_suffix(".tmp")
        with open(tmp, "wb") as fh:
            fh.write(dump_set(ds))
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)

    def names(self) -> list[str]:
        with self._lock:
            return sorted(self._sets)
