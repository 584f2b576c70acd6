"""Transactional property-graph store.

Concurrency model: the committed graph is an immutable `GraphState`; readers
pin the state current at `begin` and never block anyone.  Writers buffer a
change set and commit optimistically under a single commit lock, so many
write transactions may be open at once but only one commits at a time.
Write-write conflicts (same node property touched, or a touched object
deleted) surface at commit as `TransactionConflictError`.

Durability: a committed transaction is appended to the write-ahead log and
fsynced before the commit call returns.  Uncommitted work never reaches
disk, so recovery is replay of intact log records over the latest snapshot.
"""

from __future__ import annotations

import bisect
import itertools
import threading
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import (
    StoreClosedError,
    TransactionConflictError,
    TransactionStateError,
    TypeConflictError,
    UnknownEdgeError,
    UnknownNodeError,
    ValidationError,
)
from . import values, wal
from .model import Constraint, Edge, Node, ResultSpec, as_constraints, shape_results

READ_ONLY = "read-only"
READ_WRITE = "read-write"

_EQ_FIRST = {"==": 0, ">=": 1, ">": 1, "<=": 1, "<": 1, "!=": 2}


class PropIndex:
    """Sorted (value key, node id) pairs for one (class, property)."""

    __slots__ = ("pairs",)

    def __init__(self, pairs=None):
        self.pairs = pairs if pairs is not None else []

    def copy(self) -> "PropIndex":
        return PropIndex(list(self.pairs))

    def insert(self, value, node_id: int) -> None:
        bisect.insort(self.pairs, (values.sort_key(value), node_id))

    def remove(self, value, node_id: int) -> None:
        i = bisect.bisect_left(self.pairs, (values.sort_key(value), node_id))
        if i < len(self.pairs) and self.pairs[i] == (values.sort_key(value), node_id):
            del self.pairs[i]

    def candidates(self, op: str, comparand) -> list[int]:
        key = values.sort_key(comparand)
        pairs = self.pairs
        if op == "==":
            lo = bisect.bisect_left(pairs, (key,))
            hi = bisect.bisect_right(pairs, (key, 2**64))
            return [nid for _, nid in pairs[lo:hi]]
        if op in (">", ">="):
            lo = (
                bisect.bisect_right(pairs, (key, 2**64))
                if op == ">"
                else bisect.bisect_left(pairs, (key,))
            )
            return [nid for _, nid in pairs[lo:]]
        if op in ("<", "<="):
            hi = (
                bisect.bisect_left(pairs, (key,))
                if op == "<"
                else bisect.bisect_right(pairs, (key, 2**64))
            )
            return [nid for _, nid in pairs[:hi]]
        raise ValidationError(f"index cannot serve operator {op!r}")


@dataclass(frozen=True)
class GraphState:
    """One immutable committed version of the whole graph."""

    version: int
    nodes: dict = field(default_factory=dict)
    edges: dict = field(default_factory=dict)
    out_edges: dict = field(default_factory=dict)  # node id -> tuple of edge ids
    in_edges: dict = field(default_factory=dict)
    by_class: dict = field(default_factory=dict)  # class -> set of node ids
    schema: dict = field(default_factory=dict)  # (class, prop) -> value tag
    indexes: dict = field(default_factory=dict)  # (class, prop) -> PropIndex
    next_node_id: int = 1
    next_edge_id: int = 1


class Transaction:
    """Handle for one unit of work; safe to hand between threads."""

    _ids = itertools.count(1)

    def __init__(self, store: "GraphStore", mode: str, base: GraphState):
        self.txn_id = next(Transaction._ids)
        self.mode = mode
        self.base = base
        self.state = "open"
        self._lock = threading.Lock()
        # change set
        self.ops: list[tuple] = []
        self.new_nodes: dict[int, Node] = {}  # additions and modified copies
        self.new_edges: dict[int, Edge] = {}
        self.deleted_nodes: set[int] = set()
        self.deleted_edges: set[int] = set()
        self.out_add: dict[int, list[int]] = {}
        self.in_add: dict[int, list[int]] = {}
        self.schema_add: dict = {}
        self.index_add: set = set()
        # conflict detection
        self.writes: set[tuple[str, int, str]] = set()
        self.deletes: set[tuple[str, int]] = set()

    @property
    def read_only(self) -> bool:
        return self.mode == READ_ONLY

    def _require_open(self):
        if self.state != "open":
            raise TransactionStateError(f"transaction is {self.state}")

    def _require_write(self):
        self._require_open()
        if self.read_only:
            raise TransactionStateError("transaction is read-only")

    # --- merged view over base state + pending change set -------------------

    def get_node(self, node_id: int) -> Node | None:
        if node_id in self.deleted_nodes:
            return None
        node = self.new_nodes.get(node_id)
        if node is not None:
            return node
        return self.base.nodes.get(node_id)

    def get_edge(self, edge_id: int) -> Edge | None:
        if edge_id in self.deleted_edges:
            return None
        edge = self.new_edges.get(edge_id)
        if edge is not None:
            return edge
        return self.base.edges.get(edge_id)

    def class_members(self, node_class: str):
        for nid in self.base.by_class.get(node_class, ()):
            if nid not in self.deleted_nodes:
                yield nid
        for nid, node in self.new_nodes.items():
            if node.node_class == node_class and nid not in self.base.nodes:
                yield nid

    def incident(self, node_id: int, direction: str):
        ids: list[int] = []
        if direction in ("out", "any"):
            ids += self.base.out_edges.get(node_id, ())
            ids += self.out_add.get(node_id, ())
        if direction in ("in", "any"):
            ids += self.base.in_edges.get(node_id, ())
            ids += self.in_add.get(node_id, ())
        for eid in ids:
            if eid not in self.deleted_edges:
                yield self.get_edge(eid)

    def schema_tag(self, node_class: str, prop: str):
        key = (node_class, prop)
        if key in self.schema_add:
            return self.schema_add[key]
        return self.base.schema.get(key)


class GraphStore:
    """Embedded graph database persisted under one directory."""

    SNAPSHOT_FILE = "graph.snapshot"
    WAL_FILE = "graph.wal"

    def __init__(self, path, snapshot_wal_bytes: int = 8 * 1024 * 1024):
        self.path = Path(path)
        self.path.mkdir(parents=True, exist_ok=True)
        self._snapshot_wal_bytes = snapshot_wal_bytes
        self._lock = threading.Lock()  # guards state pointer, history, counters
        self._closed = False
        self._active: dict[int, int] = {}  # txn id -> base version
        self._history: list[tuple[int, frozenset, frozenset]] = []

        self._state, log_end = self._recover()
        self._next_node_id = self._state.next_node_id
        self._next_edge_id = self._state.next_edge_id
        self._wal = wal.WriteAheadLog(self.path / self.WAL_FILE, truncate_to=log_end)

    # --- lifecycle -----------------------------------------------------------

    def _recover(self) -> tuple[GraphState, int]:
        snap = wal.read_snapshot(self.path / self.SNAPSHOT_FILE)
        if snap is None:
            state = GraphState(version=0)
        else:
            version, next_node, next_edge, schema, index_defs, nodes, edges = snap
            out_edges: dict[int, tuple] = {}
            in_edges: dict[int, tuple] = {}
            by_class: dict[str, set] = {}
            for node in nodes.values():
                by_class.setdefault(node.node_class, set()).add(node.node_id)
            for edge in edges.values():
                out_edges[edge.src] = out_edges.get(edge.src, ()) + (edge.edge_id,)
                in_edges[edge.dst] = in_edges.get(edge.dst, ()) + (edge.edge_id,)
            indexes = {key: PropIndex() for key in index_defs}
            state = GraphState(
                version=version,
                nodes=nodes,
                edges=edges,
                out_edges=out_edges,
                in_edges=in_edges,
                by_class=by_class,
                schema=schema,
                indexes=indexes,
                next_node_id=next_node,
                next_edge_id=next_edge,
            )
            for key, index in indexes.items():
                node_class, prop = key
                for nid in by_class.get(node_class, ()):
                    props = nodes[nid].properties
                    if prop in props:
                        index.insert(props[prop], nid)

        payloads, log_end = wal.scan_log(self.path / self.WAL_FILE)
        for payload in payloads:
            version, ops = wal.decode_txn(payload)
            if version <= state.version:
                continue  # already folded into the snapshot
            state = self._apply(state, version, ops)
        return state, log_end

    def close(self) -> None:
        with self._lock:
            if self._closed:
                return
            wal.write_snapshot(self.path / self.SNAPSHOT_FILE, self._state)
            self._wal.truncate()
            self._wal.close()
            self._closed = True

    def _require_open(self):
        if self._closed:
            raise StoreClosedError("graph store is closed")

    # --- transactions --------------------------------------------------------

    def begin(self, mode: str = READ_WRITE) -> Transaction:
        if mode not in (READ_ONLY, READ_WRITE):
            raise ValidationError(f"unknown transaction mode {mode!r}")
        with self._lock:
            self._require_open()
            txn = Transaction(self, mode, self._state)
            self._active[txn.txn_id] = self._state.version
            return txn

    def commit(self, txn: Transaction) -> None:
        with txn._lock:
            txn._require_open()
            if txn.read_only or not txn.ops:
                txn.state = "committed"
                self._forget(txn)
                return
            with self._lock:
                self._require_open()
                latest = self._state
                try:
                    self._check_conflicts(txn, latest)
                    version = latest.version + 1
                    try:
                        new_state = self._apply(latest, version, txn.ops)
                    except (UnknownNodeError, UnknownEdgeError, TypeConflictError) as exc:
                        # Valid when buffered, invalidated by a later committer.
                        raise TransactionConflictError(str(exc)) from exc
                    self._wal.append(wal.encode_txn(version, txn.ops))
                except BaseException:
                    # A commit that did not reach the log is a rollback; the
                    # handle must not linger in the active registry.
                    txn.state = "aborted"
                    self._forget_locked(txn)
                    raise
                self._state = new_state
                self._history.append(
                    (version, frozenset(txn.writes), frozenset(txn.deletes))
                )
                txn.state = "committed"
                self._forget_locked(txn)
                self._prune_history()
                if self._wal.size() >= self._snapshot_wal_bytes:
                    wal.write_snapshot(self.path / self.SNAPSHOT_FILE, self._state)
                    self._wal.truncate()

    def abort(self, txn: Transaction) -> None:
        with txn._lock:
            txn._require_open()
            txn.state = "aborted"
            self._forget(txn)

    def _forget(self, txn: Transaction) -> None:
        with self._lock:
            self._forget_locked(txn)

    def _forget_locked(self, txn: Transaction) -> None:
        self._active.pop(txn.txn_id, None)
        self._prune_history()

    def _prune_history(self) -> None:
        floor = min(self._active.values(), default=self._state.version)
        self._history = [h for h in self._history if h[0] > floor]

    def _check_conflicts(self, txn: Transaction, latest: GraphState) -> None:
        base = txn.base.version
        if latest.version == base:
            return
        touched = {(kind, oid) for kind, oid, _ in txn.writes} | txn.deletes
        for version, writes, deletes in self._history:
            if version <= base:
                continue
            if txn.writes & writes:
                raise TransactionConflictError(
                    "concurrent transaction wrote the same property"
                )
            their_touched = {(kind, oid) for kind, oid, _ in writes} | deletes
            if (txn.deletes & their_touched) or (deletes & touched):
                raise TransactionConflictError(
                    "concurrent transaction touched a deleted object"
                )

    # --- mutation operations --------------------------------------------------

    def add_node(self, txn: Transaction, node_class: str, properties: dict) -> int:
        with txn._lock:
            txn._require_write()
            self._require_open()
            _check_class(node_class)
            props = self._typed_props(txn, node_class, properties)
            with self._lock:
                node_id = self._next_node_id
                self._next_node_id += 1
            txn.new_nodes[node_id] = Node(node_id, node_class, props)
            txn.ops.append((wal.OP_ADD_NODE, node_id, node_class, props))
            return node_id

    def add_edge(
        self, txn: Transaction, edge_class: str, src: int, dst: int, properties: dict
    ) -> int:
        with txn._lock:
            txn._require_write()
            self._require_open()
            _check_class(edge_class)
            if txn.get_node(src) is None:
                raise UnknownNodeError(src)
            if txn.get_node(dst) is None:
                raise UnknownNodeError(dst)
            props = self._typed_props(txn, edge_class, properties)
            with self._lock:
                edge_id = self._next_edge_id
                self._next_edge_id += 1
            txn.new_edges[edge_id] = Edge(edge_id, edge_class, src, dst, props)
            txn.out_add.setdefault(src, []).append(edge_id)
            txn.in_add.setdefault(dst, []).append(edge_id)
            txn.ops.append((wal.OP_ADD_EDGE, edge_id, edge_class, src, dst, props))
            return edge_id

    def set_property(self, txn: Transaction, node_id: int, name: str, value) -> None:
        with txn._lock:
            txn._require_write()
            self._require_open()
            node = txn.get_node(node_id)
            if node is None:
                raise UnknownNodeError(node_id)
            value = self._typed_value(txn, node.node_class, name, value)
            props = dict(node.properties)
            props[name] = value
            txn.new_nodes[node_id] = Node(node_id, node.node_class, props)
            txn.ops.append((wal.OP_SET_PROP, node_id, name, value))
            txn.writes.add(("node", node_id, name))

    def delete_node(self, txn: Transaction, node_id: int) -> None:
        with txn._lock:
            txn._require_write()
            self._require_open()
            node = txn.get_node(node_id)
            if node is None:
                raise UnknownNodeError(node_id)
            # Incident edges go with the node, in this same transaction.
            for edge in list(txn.incident(node_id, "any")):
                txn.deleted_edges.add(edge.edge_id)
                txn.deletes.add(("edge", edge.edge_id))
            txn.deleted_nodes.add(node_id)
            txn.new_nodes.pop(node_id, None)
            txn.deletes.add(("node", node_id))
            txn.ops.append((wal.OP_DEL_NODE, node_id))

    def delete_edge(self, txn: Transaction, edge_id: int) -> None:
        with txn._lock:
            txn._require_write()
            self._require_open()
            if txn.get_edge(edge_id) is None:
                raise UnknownEdgeError(edge_id)
            txn.deleted_edges.add(edge_id)
            txn.new_edges.pop(edge_id, None)
            txn.deletes.add(("edge", edge_id))
            txn.ops.append((wal.OP_DEL_EDGE, edge_id))

    def create_index(self, txn: Transaction, node_class: str, prop: str) -> None:
        with txn._lock:
            txn._require_write()
            self._require_open()
            _check_class(node_class)
            key = (node_class, prop)
            if key in txn.base.indexes or key in txn.index_add:
                return  # idempotent
            txn.index_add.add(key)
            txn.ops.append((wal.OP_CREATE_INDEX, node_class, prop))

    def _typed_props(self, txn: Transaction, node_class: str, properties: dict) -> dict:
        props = {}
        for name, raw in (properties or {}).items():
            props[name] = self._typed_value(txn, node_class, name, raw)
        return props

    def _typed_value(self, txn: Transaction, node_class: str, name: str, raw):
        if not isinstance(name, str) or not name:
            raise ValidationError("property names must be non-empty strings")
        value = values.normalize(raw)
        tag = values.type_tag(value)
        fixed = txn.schema_tag(node_class, name)
        if fixed is None:
            txn.schema_add[(node_class, name)] = tag
        elif fixed != tag:
            raise TypeConflictError(
                f"property {node_class}.{name} is {values.TAG_NAMES[fixed]}, "
                f"got {values.TAG_NAMES[tag]}"
            )
        return value

    # --- queries ---------------------------------------------------------------

    def get_node(self, txn: Transaction, node_id: int) -> Node:
        txn._require_open()
        node = txn.get_node(node_id)
        if node is None:
            raise UnknownNodeError(node_id)
        return node

    def find_nodes(
        self,
        txn: Transaction,
        node_class: str,
        constraints=(),
        spec: ResultSpec | None = None,
    ):
        txn._require_open()
        self._require_open()
        cons = as_constraints(constraints)
        self._check_constraint_types(txn, node_class, cons)
        matched = [
            node
            for node in self._candidates(txn, node_class, cons)
            if all(c.matches(node.properties) for c in cons)
        ]
        return shape_results(matched, spec)

    def neighbors(
        self,
        txn: Transaction,
        start,
        edge_class: str | None = None,
        direction: str = "any",
        target_class: str | None = None,
        constraints=(),
        spec: ResultSpec | None = None,
    ):
        txn._require_open()
        self._require_open()
        if direction not in ("in", "out", "any"):
            raise ValidationError(f"unknown direction {direction!r}")
        cons = as_constraints(constraints)
        if target_class is not None:
            self._check_constraint_types(txn, target_class, cons)
        seen: dict[int, Node] = {}
        for node_id in start:
            if txn.get_node(node_id) is None:
                raise UnknownNodeError(node_id)
            for edge in txn.incident(node_id, direction):
                if edge_class is not None and edge.edge_class != edge_class:
                    continue
                if direction == "out":
                    other_ids = (edge.dst,)
                elif direction == "in":
                    other_ids = (edge.src,)
                else:
                    other_ids = {edge.src, edge.dst} - {node_id} or {node_id}
                for other_id in other_ids:
                    if other_id in seen:
                        continue
                    other = txn.get_node(other_id)
                    if other is None:
                        continue
                    if target_class is not None and other.node_class != target_class:
                        continue
                    if all(c.matches(other.properties) for c in cons):
                        seen[other_id] = other
        return shape_results(list(seen.values()), spec)

    def dump(self, txn: Transaction | None = None) -> dict:
        """Canonical full-graph snapshot for comparisons and tests."""
        own = txn is None
        if own:
            txn = self.begin(READ_ONLY)
        try:
            nodes = {}
            for nid in sorted(
                set(txn.base.nodes) | set(txn.new_nodes) - txn.deleted_nodes
            ):
                node = txn.get_node(nid)
                if node is not None:
                    nodes[nid] = {
                        "class": node.node_class,
                        "properties": dict(node.properties),
                    }
            edges = {}
            for eid in sorted(
                set(txn.base.edges) | set(txn.new_edges) - txn.deleted_edges
            ):
                edge = txn.get_edge(eid)
                if edge is not None:
                    edges[eid] = {
                        "class": edge.edge_class,
                        "src": edge.src,
                        "dst": edge.dst,
                        "properties": dict(edge.properties),
                    }
            return {"nodes": nodes, "edges": edges}
        finally:
            if own:
                self.abort(txn)

    def _check_constraint_types(self, txn, node_class, cons: tuple[Constraint, ...]):
        for c in cons:
            fixed = txn.schema_tag(node_class, c.prop)
            if fixed is None:
                continue
            if not values.tags_comparable(fixed, values.type_tag(c.value)):
                raise TypeConflictError(
                    f"constraint on {node_class}.{c.prop} compares "
                    f"{values.TAG_NAMES[fixed]} with "
                    f"{values.TAG_NAMES[values.type_tag(c.value)]}"
                )

    def _candidates(self, txn: Transaction, node_class: str, cons):
        """Nodes of the class worth checking, via an index when one applies."""
        index_key = None
        chosen = None
        for c in sorted(cons, key=lambda c: _EQ_FIRST[c.op]):
            if c.op == "!=":
                break
            if (node_class, c.prop) in txn.base.indexes:
                index_key, chosen = (node_class, c.prop), c
                break
        if index_key is None:
            for nid in txn.class_members(node_class):
                node = txn.get_node(nid)
                if node is not None:
                    yield node
            return
        index = txn.base.indexes[index_key]
        for nid in index.candidates(chosen.op, chosen.value):
            if nid in txn.deleted_nodes or nid in txn.new_nodes:
                continue  # overlay versions come from the second loop
            yield txn.base.nodes[nid]
        for nid, node in txn.new_nodes.items():
            if node.node_class == node_class:
                yield node

    # --- state application (commit path and recovery replay) -------------------

    def _apply(self, state: GraphState, version: int, ops: list[tuple]) -> GraphState:
        nodes = dict(state.nodes)
        edges = dict(state.edges)
        out_edges = dict(state.out_edges)
        in_edges = dict(state.in_edges)
        by_class = dict(state.by_class)
        schema = dict(state.schema)
        indexes = dict(state.indexes)
        next_node = state.next_node_id
        next_edge = state.next_edge_id

        def fix_type(node_class, name, value):
            tag = values.type_tag(value)
            fixed = schema.get((node_class, name))
            if fixed is None:
                schema[(node_class, name)] = tag
            elif fixed != tag:
                raise TypeConflictError(
                    f"property {node_class}.{name} is {values.TAG_NAMES[fixed]}"
                )

        def index_insert(node):
            for (cls, prop), index in indexes.items():
                if cls == node.node_class and prop in node.properties:
                    indexes[(cls, prop)] = index = (
                        index.copy() if index is state.indexes.get((cls, prop)) else index
                    )
                    index.insert(node.properties[prop], node.node_id)

        def index_remove(node):
            for (cls, prop), index in indexes.items():
                if cls == node.node_class and prop in node.properties:
                    indexes[(cls, prop)] = index = (
                        index.copy() if index is state.indexes.get((cls, prop)) else index
                    )
                    index.remove(node.properties[prop], node.node_id)

        def drop_edge(edge_id):
            edge = edges.pop(edge_id)
            out_edges[edge.src] = tuple(
                e for e in out_edges.get(edge.src, ()) if e != edge_id
            )
            in_edges[edge.dst] = tuple(
                e for e in in_edges.get(edge.dst, ()) if e != edge_id
            )

        for op in ops:
            kind = op[0]
            if kind == wal.OP_ADD_NODE:
                _, node_id, node_class, props = op
                for name, value in props.items():
                    fix_type(node_class, name, value)
                node = Node(node_id, node_class, props)
                nodes[node_id] = node
                members = by_class.get(node_class)
                by_class[node_class] = (set(members) if members else set()) | {node_id}
                index_insert(node)
                next_node = max(next_node, node_id + 1)
            elif kind == wal.OP_ADD_EDGE:
                _, edge_id, edge_class, src, dst, props = op
                if src not in nodes:
                    raise UnknownNodeError(src)
                if dst not in nodes:
                    raise UnknownNodeError(dst)
                for name, value in props.items():
                    fix_type(edge_class, name, value)
                edges[edge_id] = Edge(edge_id, edge_class, src, dst, props)
                out_edges[src] = out_edges.get(src, ()) + (edge_id,)
                in_edges[dst] = in_edges.get(dst, ()) + (edge_id,)
                next_edge = max(next_edge, edge_id + 1)
            elif kind == wal.OP_SET_PROP:
                _, node_id, name, value = op
                node = nodes.get(node_id)
                if node is None:
                    raise UnknownNodeError(node_id)
                fix_type(node.node_class, name, value)
                index_remove(node)
                props = dict(node.properties)
                props[name] = value
                node = Node(node_id, node.node_class, props)
                nodes[node_id] = node
                index_insert(node)
            elif kind == wal.OP_DEL_NODE:
                _, node_id = op
                node = nodes.get(node_id)
                if node is None:
                    raise UnknownNodeError(node_id)
                # Cascade computed at apply time so concurrent edge additions
                # cannot leave danglers.
                for edge_id in list(out_edges.get(node_id, ())) + list(
                    in_edges.get(node_id, ())
                ):
                    if edge_id in edges:
                        drop_edge(edge_id)
                index_remove(node)
                del nodes[node_id]
                by_class[node.node_class] = set(by_class[node.node_class]) - {node_id}
                out_edges.pop(node_id, None)
                in_edges.pop(node_id, None)
            elif kind == wal.OP_DEL_EDGE:
                _, edge_id = op
                if edge_id not in edges:
                    raise UnknownEdgeError(edge_id)
                drop_edge(edge_id)
            elif kind == wal.OP_CREATE_INDEX:
                _, node_class, prop = op
                key = (node_class, prop)
                if key not in indexes:
                    index = PropIndex()
                    for nid in by_class.get(node_class, ()):
                        if prop in nodes[nid].properties:
                            index.insert(nodes[nid].properties[prop], nid)
                    indexes[key] = index

        return GraphState(
            version=version,
            nodes=nodes,
            edges=edges,
            out_edges=out_edges,
            in_edges=in_edges,
            by_class=by_class,
            schema=schema,
            indexes=indexes,
            next_node_id=max(next_node, self._peek_next_node()),
            next_edge_id=max(next_edge, self._peek_next_edge()),
        )

    def _peek_next_node(self) -> int:
        return getattr(self, "_next_node_id", 1)

    def _peek_next_edge(self) -> int:
        return getattr(self, "_next_edge_id", 1)


def _check_class(name: str) -> None:
    if not isinstance(name, str) or not name:
        raise ValidationError("class must be a non-empty string")
